#pragma once

// Least angle regression for sparse PCE.
//
// The constant column 0 is an unpenalized intercept: the path is computed on
// centered columns and a centered response, and the intercept is recovered
// exactly. Columns are not rescaled, so the path is the one of the raw-
// coefficient problem  1/2 ||y - Psi c||^2 + lambda sum_{j>=1} |c_j|.
//
// Each step refits the active columns by OLS and scores them by the plain
// leave-one-out error (Hybrid LARS).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpce/basis.hpp"
#include "cpce/errors.hpp"
#include "cpce/ols.hpp"

namespace cpce {

enum class LarsVariant {
    Plain,          // variables only enter
    LassoModified,  // a coefficient crossing zero leaves the active set
};

/// Model-selection criterion along the path.
enum class LooCriterion {
    Plain,      // mean squared leave-one-out residual
    Corrected,  // plain times N/(N-P) (1 + tr((Psi_A^T Psi_A)^{-1})), which penalizes near-interpolating sets
};

struct LarsStep {
    std::vector<Eigen::Index> active;  // column 0 first, then in order of entry
    Eigen::VectorXd lars_coeffs;       // length P, at the end of this step's segment
    Eigen::VectorXd ols_coeffs;        // length P, OLS refit on `active`
    double loo_error = std::numeric_limits<double>::infinity();        // plain
    double selection_error = std::numeric_limits<double>::infinity();  // per LarsOptions::criterion
    double lambda = 0.0;               // max |gradient| at lars_coeffs
    bool dropped = false;              // reached by removing a variable
};

struct LarsPath {
    std::vector<LarsStep> steps;
    std::size_t selected_step = 0;  // argmin of selection_error over steps with |active| < n
};

/// Hybrid-LARS selection: OLS coefficients on the active set chosen by LOO error.
struct SparseFit {
    std::vector<Eigen::Index> active;
    Eigen::VectorXd coeffs;  // length P, zero off the active set
    double lambda_hat = 0.0;
    std::size_t selected_step = 0;
    double loo_error = 0.0;  // plain leave-one-out error of the selected step
};

/// Sparse PCE: candidate basis plus a hybrid-LARS fit over it.
struct SparsePceModel {
    PceBasis basis;
    SparseFit fit;

    double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const { return basis.row(x).dot(fit.coeffs); }
    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
        return basis.matrix(points) * fit.coeffs;
    }
};

/// max_j |Psi_j^T (Psi c - y)| over all columns: the smallest LASSO penalty for
/// which `c` could satisfy the stationarity conditions.
inline double pseudo_lambda(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y,
                            const Eigen::Ref<const Eigen::VectorXd>& c) {
    return (psi.transpose() * (psi * c - y)).cwiseAbs().maxCoeff();
}

struct LarsOptions {
    LarsVariant variant = LarsVariant::Plain;
    /// Stop once the penalty would fall below this value (the last step then
    /// ends exactly at it). Zero runs the full path.
    double lambda_floor = 0.0;
    /// Skip the per-step OLS refits and LOO errors.
    bool refit = true;
    /// Relative tolerance for correlation ties; ties go to the lowest column.
    double tie_tolerance = 1e-12;
    LooCriterion criterion = LooCriterion::Corrected;
};

namespace detail {

struct LooStats {
    double plain = std::numeric_limits<double>::infinity();
    double corrected = std::numeric_limits<double>::infinity();
};

inline LooStats loo_error_of(const Eigen::MatrixXd& sub, const Eigen::VectorXd& y, Eigen::VectorXd& coeffs) {
    LooStats out;
    try {
        const OlsFit fit = ols_fit(sub, y);
        coeffs = fit.coeffs;
        for (Eigen::Index i = 0; i < fit.gram.h.size(); ++i) {
            if (!(fit.gram.h[i] > kLeverageTolerance)) return out;
        }
        const double n = static_cast<double>(y.size());
        const double p = static_cast<double>(sub.cols());
        out.plain = fit.residuals.cwiseQuotient(fit.gram.h).squaredNorm() / n;
        if (n > p) out.corrected = out.plain * n / (n - p) * (1.0 + fit.gram.inverse.trace());
        return out;
    } catch (const NumericalError&) {
        coeffs = Eigen::VectorXd::Zero(sub.cols());
        return out;
    }
}

inline Eigen::MatrixXd columns(const Eigen::Ref<const Eigen::MatrixXd>& psi, const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(psi.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = psi.col(cols[k]);
    return out;
}

}  // namespace detail

/// LARS path with at most `max_steps` active columns (intercept included).
inline LarsPath lars_path(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y,
                          std::size_t max_steps, const LarsOptions& opts = {}) {
    const Eigen::Index n = psi.rows();
    const Eigen::Index p = psi.cols();
    if (y.size() != n) throw ConfigError("response length does not match regression matrix rows");
    if (n < 2 || p < 1) throw ConfigError("LARS needs at least two points and one column");
    if (((psi.col(0).array() - psi(0, 0)).abs() > 1e-12 * std::max(1.0, std::abs(psi(0, 0)))).any() ||
        psi(0, 0) == 0.0) {
        throw ConfigError("column 0 of the regression matrix must be the constant term");
    }
    max_steps = std::max<std::size_t>(1, std::min<std::size_t>(max_steps, static_cast<std::size_t>(p)));

    const Eigen::Index q = p - 1;  // penalized columns, indexed 0..q-1 <-> psi column j+1
    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;
    const Eigen::RowVectorXd col_mean = psi.rightCols(q).colwise().mean();
    const Eigen::MatrixXd xc = psi.rightCols(q).rowwise() - col_mean;
    for (Eigen::Index j = 0; j < q; ++j) {
        if (xc.col(j).squaredNorm() <= 1e-24 * static_cast<double>(n)) {
            throw ConfigError("column " + std::to_string(j + 1) + " is constant on the design");
        }
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd corr = xc.transpose() * yc;
    std::vector<Eigen::Index> active;  // penalized indices in entry order
    std::vector<char> is_active(static_cast<std::size_t>(q), 0);
    Eigen::VectorXd sign_of = Eigen::VectorXd::Zero(q);
    double lambda = q > 0 ? corr.cwiseAbs().maxCoeff() : 0.0;
    const double lambda_start = lambda;

    LarsPath path;

    auto record = [&](bool dropped) {
        LarsStep step;
        step.active.push_back(0);
        for (auto j : active) step.active.push_back(j + 1);
        step.lars_coeffs = Eigen::VectorXd::Zero(p);
        for (auto j : active) step.lars_coeffs[j + 1] = beta[j];
        step.lars_coeffs[0] = y_mean - col_mean.dot(beta);
        step.lambda = lambda;
        step.dropped = dropped;
        step.ols_coeffs = Eigen::VectorXd::Zero(p);
        if (opts.refit) {
            Eigen::VectorXd sub_coeffs;
            const auto loo = detail::loo_error_of(detail::columns(psi, step.active), y, sub_coeffs);
            step.loo_error = loo.plain;
            step.selection_error = opts.criterion == LooCriterion::Plain ? loo.plain : loo.corrected;
            for (std::size_t k = 0; k < step.active.size(); ++k) {
                step.ols_coeffs[step.active[k]] = sub_coeffs[static_cast<Eigen::Index>(k)];
            }
        }
        path.steps.push_back(std::move(step));
    };

    // Lowest-index argmax of |corr| among inactive columns, ties within tolerance.
    auto strongest_inactive = [&]() -> Eigen::Index {
        double best = -1.0;
        for (Eigen::Index j = 0; j < q; ++j) {
            if (!is_active[static_cast<std::size_t>(j)]) best = std::max(best, std::abs(corr[j]));
        }
        for (Eigen::Index j = 0; j < q; ++j) {
            if (!is_active[static_cast<std::size_t>(j)] && std::abs(corr[j]) >= best * (1.0 - opts.tie_tolerance)) {
                return j;
            }
        }
        return -1;
    };

    const double tiny = 1e-14 * std::max(1.0, lambda_start);
    record(false);  // step 0: intercept only, ends where the first column enters
    if (q == 0 || lambda <= tiny || lambda <= opts.lambda_floor) {
        path.selected_step = 0;
        return path;
    }

    Eigen::Index entering = strongest_inactive();
    const std::size_t rank_limit = static_cast<std::size_t>(std::min<Eigen::Index>(q, n - 1));
    const std::size_t max_penalized = std::min<std::size_t>(max_steps - 1, rank_limit);
    bool last_was_drop = false;

    while (true) {
        if (!last_was_drop) {
            if (entering < 0 || active.size() >= max_penalized) break;
            active.push_back(entering);
            is_active[static_cast<std::size_t>(entering)] = 1;
            sign_of[entering] = corr[entering] >= 0.0 ? 1.0 : -1.0;
        }

        const auto k = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd xa(n, k);
        Eigen::VectorXd sa(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            xa.col(a) = xc.col(active[static_cast<std::size_t>(a)]);
            sa[a] = sign_of[active[static_cast<std::size_t>(a)]];
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(xa.transpose() * xa);
        if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
            throw NumericalError("collinear active columns in LARS at step " + std::to_string(k));
        }
        const Eigen::VectorXd w = ldlt.solve(sa);                    // d beta_A / d(-lambda)
        const Eigen::VectorXd dir_corr = xc.transpose() * (xa * w);  // d corr / d(-lambda)

        // next entry: |corr_j - delta dir_corr_j| = lambda - delta
        double delta = lambda;
        Eigen::Index event = -1;
        bool event_is_drop = false;
        for (Eigen::Index j = 0; j < q; ++j) {
            if (is_active[static_cast<std::size_t>(j)]) continue;
            for (const double s : {1.0, -1.0}) {
                const double den = 1.0 - s * dir_corr[j];
                if (den <= 1e-14) continue;
                const double d = (lambda - s * corr[j]) / den;
                if (!(d > tiny)) continue;
                if (event < 0 ? d < delta : d < delta * (1.0 - opts.tie_tolerance)) {
                    delta = d;
                    event = j;
                } else if (event >= 0 && j < event && std::abs(d - delta) <= opts.tie_tolerance * delta) {
                    event = j;
                }
            }
        }
        if (opts.variant == LarsVariant::LassoModified) {
            for (Eigen::Index a = 0; a < k; ++a) {
                if (w[a] == 0.0) continue;
                const Eigen::Index j = active[static_cast<std::size_t>(a)];
                const double d = -beta[j] / w[a];
                if (d > tiny && d < delta) {
                    delta = d;
                    event = j;
                    event_is_drop = true;
                }
            }
        }
        bool at_floor = false;
        if (lambda - delta <= opts.lambda_floor) {
            delta = lambda - opts.lambda_floor;
            at_floor = true;
        }

        for (Eigen::Index a = 0; a < k; ++a) beta[active[static_cast<std::size_t>(a)]] += delta * w[a];
        corr -= delta * dir_corr;
        lambda = at_floor ? opts.lambda_floor : lambda - delta;
        if (event_is_drop && !at_floor) beta[event] = 0.0;
        record(last_was_drop);
        if (at_floor || event < 0) break;

        if (event_is_drop) {
            active.erase(std::find(active.begin(), active.end(), event));
            is_active[static_cast<std::size_t>(event)] = 0;
            sign_of[event] = 0.0;
            last_was_drop = true;
        } else {
            entering = event;
            last_was_drop = false;
        }
    }

    double best = std::numeric_limits<double>::infinity();
    path.selected_step = 0;
    for (std::size_t s = 0; s < path.steps.size(); ++s) {
        const auto& st = path.steps[s];
        if (static_cast<Eigen::Index>(st.active.size()) < n && st.selection_error < best) {
            best = st.selection_error;
            path.selected_step = s;
        }
    }
    return path;
}

/// Hybrid-LARS model of the selected step. The pseudo-penalty is taken from the
/// LARS coefficients of that step, which is the knot value of lambda.
inline SparseFit hybrid_select(const LarsPath& path) {
    if (path.steps.empty()) throw ConfigError("empty LARS path");
    const auto& st = path.steps.at(path.selected_step);
    if (!std::isfinite(st.selection_error)) {
        throw NumericalError("every LARS step has a degenerate leave-one-out error");
    }
    SparseFit fit;
    fit.active = st.active;
    fit.coeffs = st.ols_coeffs;
    fit.lambda_hat = st.lambda;
    fit.selected_step = path.selected_step;
    fit.loo_error = st.loo_error;
    return fit;
}

/// Full Hybrid LARS: path up to min(n - 1, P) active columns, then selection.
inline SparseFit fit_hybrid_lars(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                 const Eigen::Ref<const Eigen::VectorXd>& y,
                                 LooCriterion criterion = LooCriterion::Corrected) {
    const auto max_steps = static_cast<std::size_t>(std::min<Eigen::Index>(psi.rows() - 1, psi.cols()));
    LarsOptions opts;
    opts.criterion = criterion;
    return hybrid_select(lars_path(psi, y, max_steps, opts));
}

/// LASSO solution at penalty `lambda` (intercept unpenalized), via the
/// LASSO-modified LARS path stopped at that penalty.
inline Eigen::VectorXd lasso_at(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                const Eigen::Ref<const Eigen::VectorXd>& y, double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("LASSO penalty must be >= 0");
    LarsOptions opts;
    opts.variant = LarsVariant::LassoModified;
    opts.lambda_floor = lambda;
    opts.refit = false;
    const auto path = lars_path(psi, y, static_cast<std::size_t>(psi.cols()), opts);
    return path.steps.back().lars_coeffs;
}

/// OLS refit on the first `k` columns (intercept included) selected by plain LARS.
inline Eigen::VectorXd refit_at_count(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                      const Eigen::Ref<const Eigen::VectorXd>& y, std::size_t k) {
    LarsOptions opts;
    opts.refit = false;
    const auto path = lars_path(psi, y, k, opts);
    const auto& active = path.steps.back().active;
    const OlsFit fit = ols_fit(detail::columns(psi, active), y);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(psi.cols());
    for (std::size_t a = 0; a < active.size(); ++a) out[active[a]] = fit.coeffs[static_cast<Eigen::Index>(a)];
    return out;
}

}  // namespace cpce
