#pragma once

// Prediction-interval engines: split conformal, full conformal (closed form for
// OLS, homotopy-accelerated search for sparse PCE, and the slow refit-based
// reference), Jackknife+ and percentile bootstrap.
//
// Every engine answers `intervals(phi, levels)` for one query row and several
// levels at once; results follow the order of `levels`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "cpce/errors.hpp"
#include "cpce/homotopy.hpp"
#include "cpce/lars.hpp"
#include "cpce/ols.hpp"
#include "cpce/quantile.hpp"
#include "cpce/rng.hpp"

namespace cpce {

using Row = Eigen::RowVectorXd;

// ---------------------------------------------------------------- split conformal

/// Calibrated residual quantiles around any point predictor.
class SplitConformal {
public:
    /// `residuals` are y - M(x) on the calibration set.
    SplitConformal(std::vector<double> residuals, Symmetry symmetry)
        : residuals_(std::move(residuals)), symmetry_(symmetry) {
        if (residuals_.empty()) throw ConfigError("empty calibration set");
        abs_.reserve(residuals_.size());
        for (double r : residuals_) abs_.push_back(std::abs(r));
    }

    PredictionInterval interval(double prediction, Level level) const {
        if (symmetry_ == Symmetry::Symmetric) {
            const double q = q_plus(abs_, level);
            return {prediction - q, prediction + q};
        }
        return {prediction + q_minus(residuals_, level.half()), prediction + q_plus(residuals_, level.half())};
    }

    std::vector<PredictionInterval> intervals(double prediction, std::span<const Level> levels) const {
        std::vector<PredictionInterval> out;
        for (auto l : levels) out.push_back(interval(prediction, l));
        return out;
    }

private:
    std::vector<double> residuals_;
    std::vector<double> abs_;
    Symmetry symmetry_;
};

/// Split conformal interval at one point from a fitted predictor and a calibration set.
template <typename Model>
PredictionInterval split_conformal(const Model& model, const ExperimentalDesign& cal,
                                   const Eigen::Ref<const Eigen::VectorXd>& x, Level level, Symmetry symmetry) {
    if (cal.size() == 0) throw ConfigError("empty calibration set");
    const Eigen::VectorXd r = cal.responses - model.predict(cal.points);
    return SplitConformal(std::vector<double>(r.data(), r.data() + r.size()), symmetry).interval(model(x), level);
}

// ---------------------------------------------------------------- full conformal, OLS

/// Full conformal prediction for an OLS PCE.
///
/// Residuals of the augmented fit are affine in the trial response y:
/// R_i(y) = A_i + B_i y. The conformal set is a union of intervals whose ends
/// are the n points where a training score crosses the new point's score; a
/// sorted sweep over these candidates evaluates every level at once.
class FullConformalOls {
public:
    FullConformalOls(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y,
                     Symmetry symmetry = Symmetry::Asymmetric)
        : FullConformalOls(psi, y, ols_fit(psi, y), symmetry) {}

    FullConformalOls(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y,
                     OlsFit fit, Symmetry symmetry)
        : psi_(psi), y_(y), fit_(std::move(fit)), symmetry_(symmetry) {}

    const OlsFit& fit() const noexcept { return fit_; }

    /// Affine residual coefficients (A, B) of the n + 1 augmented points; the last entry is the new point.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> affine_residuals(const Eigen::Ref<const Row>& phi) const {
        const Eigen::Index n = psi_.rows();
        const Eigen::VectorXd u = fit_.gram.inverse * phi.transpose();
        const double den = 1.0 + phi.dot(u);
        if (!(den > kShermanMorrisonTolerance)) throw NumericalError("singular augmented Gram");
        const Eigen::VectorXd v = psi_ * u;
        const double pred = phi.dot(fit_.coeffs);
        Eigen::VectorXd a(n + 1), b(n + 1);
        a.head(n) = fit_.residuals + v * (pred / den);
        b.head(n) = -v / den;
        a[n] = -pred / den;
        b[n] = 1.0 / den;
        return {std::move(a), std::move(b)};
    }

    std::vector<PredictionInterval> intervals(const Eigen::Ref<const Row>& phi, std::span<const Level> levels) const {
        const auto [a, b] = affine_residuals(phi);
        return symmetry_ == Symmetry::Asymmetric ? asymmetric(a, b, levels) : symmetric(a, b, levels);
    }

    PredictionInterval interval(const Eigen::Ref<const Row>& phi, Level level) const {
        const Level one[] = {level};
        return intervals(phi, one).front();
    }

private:
    // R_i >= R_new  <=>  d_i(y) = (A_i - A_new) + (B_i - B_new) y >= 0.
    // Upper side: R_new <= k-th smallest score  <=>  #{d_i >= 0} >= n - k + 1.
    // Lower side: R_new >= l-th smallest score  <=>  #{d_i <= 0} >= l.
    std::vector<PredictionInterval> asymmetric(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                               std::span<const Level> levels) const {
        const Eigen::Index n = a.size() - 1;
        struct Cross {
            double t;
            bool rising;  // d_i goes from negative to positive
        };
        std::vector<Cross> cross;
        cross.reserve(static_cast<std::size_t>(n));
        long long up = 0, low = 0;  // counts on the left ray
        for (Eigen::Index i = 0; i < n; ++i) {
            const double da = a[i] - a[n];
            const double db = b[i] - b[n];
            if (std::abs(db) < 1e-12) {
                if (da >= 0.0) ++up;
                if (da <= 0.0) ++low;
                continue;
            }
            cross.push_back({-da / db, db > 0.0});
            if (db > 0.0) ++low; else ++up;
        }
        std::sort(cross.begin(), cross.end(), [](const Cross& x, const Cross& y) { return x.t < y.t; });

        struct Need {
            long long up, low;  // required counts; <= 0 means no constraint
        };
        std::vector<Need> need;
        for (auto lvl : levels) {
            const long long k = upper_rank(static_cast<std::size_t>(n), lvl.half());
            const long long l = lower_rank(static_cast<std::size_t>(n), lvl.half());
            need.push_back({k > n ? 0 : n - k + 1, l});
        }
        std::vector<PredictionInterval> out(levels.size(), PredictionInterval{kInf, -kInf});
        std::vector<char> found(levels.size(), 0);
        auto visit = [&](long long u, long long lo, double left, double right) {
            for (std::size_t j = 0; j < need.size(); ++j) {
                if (u >= need[j].up && lo >= need[j].low) {
                    out[j].lower = std::min(out[j].lower, left);
                    out[j].upper = std::max(out[j].upper, right);
                    found[j] = 1;
                }
            }
        };

        visit(up, low, -kInf, cross.empty() ? kInf : cross.front().t);
        for (std::size_t s = 0; s < cross.size();) {
            std::size_t e = s;
            long long rising = 0, falling = 0;
            while (e < cross.size() && cross[e].t == cross[s].t) {
                (cross[e].rising ? rising : falling) += 1;
                ++e;
            }
            const double t = cross[s].t;
            visit(up + rising, low + falling, t, t);  // d_i = 0 counts on both sides
            up += rising - falling;
            low += falling - rising;
            // the open segment's closure is in the set, so its ends are conformal points
            visit(up, low, t, e < cross.size() ? cross[e].t : kInf);
            s = e;
        }
        for (std::size_t j = 0; j < out.size(); ++j) {
            if (!found[j]) out[j] = PredictionInterval{};
        }
        return out;
    }

    // |R_i| >= |R_new|  <=>  (d_i)(s_i) >= 0 with s_i = R_i + R_new; both affine,
    // so each training point contributes up to two roots. Counts are evaluated
    // directly at every root and between consecutive roots.
    std::vector<PredictionInterval> symmetric(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                              std::span<const Level> levels) const {
        const Eigen::Index n = a.size() - 1;
        std::vector<double> roots;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double da = a[i] - a[n], db = b[i] - b[n];
            const double sa = a[i] + a[n], sb = b[i] + b[n];
            if (std::abs(db) >= 1e-12) roots.push_back(-da / db);
            if (std::abs(sb) >= 1e-12) roots.push_back(-sa / sb);
        }
        std::sort(roots.begin(), roots.end());
        roots.erase(std::unique(roots.begin(), roots.end()), roots.end());

        double scale = 1.0;
        for (Eigen::Index i = 0; i <= n; ++i) scale = std::max(scale, std::abs(a[i]));
        auto count_at = [&](double y) {
            long long c = 0;
            const double rn = a[n] + b[n] * y;
            const double tol = 1e-12 * std::max(scale * scale, rn * rn);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double ri = a[i] + b[i] * y;
                if (ri * ri - rn * rn >= -tol) ++c;
            }
            return c;
        };
        // sign of the counting condition on the rays: leading coefficients in y
        auto count_ray = [&](double sign) {
            long long c = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double lead = b[i] * b[i] - b[n] * b[n];
                if (std::abs(lead) > 1e-12) {
                    if (lead > 0.0) ++c;
                } else {
                    const double lin = 2.0 * (a[i] * b[i] - a[n] * b[n]) * sign;
                    if (lin >= 0.0) ++c;
                }
            }
            return c;
        };

        std::vector<long long> need;
        for (auto lvl : levels) {
            const long long k = upper_rank(static_cast<std::size_t>(n), lvl);
            need.push_back(k > n ? 0 : n - k + 1);
        }
        std::vector<PredictionInterval> out(levels.size(), PredictionInterval{kInf, -kInf});
        std::vector<char> found(levels.size(), 0);
        auto visit = [&](long long c, double left, double right) {
            for (std::size_t j = 0; j < need.size(); ++j) {
                if (c >= need[j]) {
                    out[j].lower = std::min(out[j].lower, left);
                    out[j].upper = std::max(out[j].upper, right);
                    found[j] = 1;
                }
            }
        };
        if (roots.empty()) {
            visit(count_ray(1.0), -kInf, kInf);
        } else {
            visit(count_ray(-1.0), -kInf, roots.front());
            for (std::size_t r = 0; r < roots.size(); ++r) {
                visit(count_at(roots[r]), roots[r], roots[r]);
                if (r + 1 < roots.size()) {
                    visit(count_at(0.5 * (roots[r] + roots[r + 1])), roots[r], roots[r + 1]);
                }
            }
            visit(count_ray(1.0), roots.back(), kInf);
        }
        for (std::size_t j = 0; j < out.size(); ++j) {
            if (!found[j]) out[j] = PredictionInterval{};
        }
        return out;
    }

    Eigen::MatrixXd psi_;
    Eigen::VectorXd y_;
    OlsFit fit_;
    Symmetry symmetry_;
};

inline PredictionInterval full_conformal_ols(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                             const Eigen::Ref<const Eigen::VectorXd>& y,
                                             const Eigen::Ref<const Row>& phi, Level level,
                                             Symmetry symmetry = Symmetry::Asymmetric) {
    return FullConformalOls(psi, y, symmetry).interval(phi, level);
}

// ---------------------------------------------------------------- full conformal, sparse

struct SparseConformalOptions {
    double bracket_multiplier = 20.0;  // K
    double tolerance = 1e-6;           // accepted squared boundary residual, relative to rho^2
    Symmetry symmetry = Symmetry::Asymmetric;
    int brent_bits = 40;
    std::uintmax_t brent_max_iter = 200;
    HomotopyOptions homotopy{};
};

namespace detail {

/// Boundary criterion at one trial response from the n + 1 augmented residuals.
/// Upper side: R_new - q+ (conformal where <= 0). Lower side: R_new - q- (conformal where >= 0).
/// Symmetric: |R_new| - q+(|R|) on both sides.
inline double boundary_criterion(const Eigen::VectorXd& r, Level level, Symmetry symmetry, bool upper) {
    const Eigen::Index n = r.size() - 1;
    std::vector<double> train(r.data(), r.data() + n);
    if (symmetry == Symmetry::Symmetric) {
        for (auto& v : train) v = std::abs(v);
        return std::abs(r[n]) - q_plus(train, level);
    }
    return r[n] - (upper ? q_plus(train, level.half()) : q_minus(train, level.half()));
}

/// Whether a side of the interval is unbounded by quantile-rank overflow.
inline bool side_overflows(std::size_t n, Level level, Symmetry symmetry, bool upper) {
    if (symmetry == Symmetry::Symmetric) return upper_rank(n, level) > static_cast<long long>(n);
    return upper ? upper_rank(n, level.half()) > static_cast<long long>(n) : lower_rank(n, level.half()) < 1;
}

/// Root of a continuous criterion on [a, b] given f(a) and f(b) of opposite sign
/// (or zero): Brent minimization of f^2, then bisection if the minimizer stalls
/// on a kink away from the root.
inline std::optional<double> bounded_root(const std::function<double(double)>& f, double a, double b, double fa,
                                          double fb, double accept, int bits, std::uintmax_t max_iter) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0)) return std::nullopt;
    const double lo = std::min(a, b), hi = std::max(a, b);
    std::uintmax_t iters = max_iter;
    const auto [x, fx2] =
        boost::math::tools::brent_find_minima([&](double t) { const double v = f(t); return v * v; }, lo, hi, bits,
                                              iters);
    if (fx2 <= accept) return x;
    double l = a, r = b, fl = fa;
    for (int it = 0; it < 200 && std::abs(r - l) > 1e-13 * std::max(1.0, std::abs(l) + std::abs(r)); ++it) {
        const double m = 0.5 * (l + r);
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm > 0.0) == (fl > 0.0)) {
            l = m;
            fl = fm;
        } else {
            r = m;
        }
    }
    return 0.5 * (l + r);
}

/// Conformal bounds by root search on the boundary criteria.
///
/// `scores(t)` returns the n + 1 augmented residuals at trial response t; it is
/// built for a bracket [lo, hi] by `make_scores`. The bracket is centre +- K rho,
/// stretched to contain `t_ref`, the trial response from which each side is searched.
inline std::vector<PredictionInterval> search_bounds(
    const std::function<std::function<Eigen::VectorXd(double)>(double, double)>& make_scores, std::size_t n,
    double t_ref, double centre, double rho, std::span<const Level> levels, const SparseConformalOptions& opts) {
    std::vector<PredictionInterval> out(levels.size());
    const double accept = opts.tolerance * rho * rho;
    double mult = opts.bracket_multiplier;
    for (int attempt = 0; attempt < 2; ++attempt, mult *= 4.0) {
        const bool last = attempt == 1;
        const double lo = std::min(centre, t_ref) - mult * rho;
        const double hi = std::max(centre, t_ref) + mult * rho;
        const auto scores = make_scores(lo, hi);
        const Eigen::VectorXd r_ref = scores(t_ref);
        const Eigen::VectorXd r_lo = scores(lo);
        const Eigen::VectorXd r_hi = scores(hi);
        bool ok = true;
        for (std::size_t j = 0; j < levels.size() && ok; ++j) {
            for (const bool upper : {false, true}) {
                if (side_overflows(n, levels[j], opts.symmetry, upper)) {
                    (upper ? out[j].upper : out[j].lower) = upper ? kInf : -kInf;
                    continue;
                }
                auto f = [&](double t) { return boundary_criterion(scores(t), levels[j], opts.symmetry, upper); };
                const double f_ref = boundary_criterion(r_ref, levels[j], opts.symmetry, upper);
                // criteria increase with t on the upper side, decrease-then-increase when symmetric
                bool toward_hi;
                if (opts.symmetry == Symmetry::Symmetric) {
                    toward_hi = upper;
                } else {
                    toward_hi = upper ? f_ref <= 0.0 : f_ref < 0.0;
                }
                // t_ref already satisfies this side, so the bound lies in the search direction
                const bool inside = opts.symmetry == Symmetry::Symmetric ? f_ref <= 0.0 : toward_hi == upper;
                const double end = toward_hi ? hi : lo;
                const double f_end = boundary_criterion(toward_hi ? r_hi : r_lo, levels[j], opts.symmetry, upper);
                const auto root = bounded_root(f, t_ref, end, f_ref, f_end, accept, opts.brent_bits,
                                               opts.brent_max_iter);
                if (root) {
                    (upper ? out[j].upper : out[j].lower) = *root;
                } else if (last && inside) {
                    // still conformal at the far end of the widened bracket
                    (upper ? out[j].upper : out[j].lower) = toward_hi ? kInf : -kInf;
                } else {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) {
            for (auto& iv : out) {
                if (iv.lower > iv.upper) std::swap(iv.lower, iv.upper);
            }
            return out;
        }
    }
    throw BracketError("conformal bound search failed after widening the bracket");
}

inline double residual_scale(const Eigen::VectorXd& residuals) {
    std::vector<double> abs(residuals.size());
    for (Eigen::Index i = 0; i < residuals.size(); ++i) abs[static_cast<std::size_t>(i)] = std::abs(residuals[i]);
    double rho = q_plus(abs, Level(0.05));
    if (!std::isfinite(rho)) rho = *std::max_element(abs.begin(), abs.end());
    if (!(rho > 0.0)) rho = 1e-8 * std::max(1.0, *std::max_element(abs.begin(), abs.end()));
    return rho > 0.0 ? rho : 1e-8;
}

}  // namespace detail

/// Full conformal prediction for a Hybrid-LARS sparse PCE.
///
/// The LASSO fit at the training pseudo-penalty is followed exactly along the
/// homotopy path in the trial response, so the support is re-selected for
/// every trial value and the new point is treated like every training point.
/// Scores are the LASSO residuals on the augmented data.
class FullConformalSparse {
public:
    FullConformalSparse(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y,
                        const SparseFit& model, SparseConformalOptions opts = {})
        : homotopy_(psi, y, model.lambda_hat, opts.homotopy), coeffs_(model.coeffs), opts_(opts),
          n_(static_cast<std::size_t>(psi.rows())) {
        // scale of the scores themselves, not of the refitted model
        rho_ = detail::residual_scale(y - psi * homotopy_.start_coeffs());
    }

    double rho() const noexcept { return rho_; }
    const LassoHomotopy& homotopy() const noexcept { return homotopy_; }

    std::vector<PredictionInterval> intervals(const Eigen::Ref<const Row>& phi, std::span<const Level> levels) const {
        const Row row = phi;
        const double centre = row.dot(coeffs_);
        // the LASSO prediction has zero augmented residual, so it lies in every conformal set
        const double t_ref = row.dot(homotopy_.start_coeffs());
        auto make = [&](double lo, double hi) -> std::function<Eigen::VectorXd(double)> {
            auto path = std::make_shared<HomotopyPath>(homotopy_.path(row, lo, hi));
            return [path](double t) { return path->residuals(t); };
        };
        return detail::search_bounds(make, n_, t_ref, centre, rho_, levels, opts_);
    }

    PredictionInterval interval(const Eigen::Ref<const Row>& phi, Level level) const {
        const Level one[] = {level};
        return intervals(phi, one).front();
    }

private:
    LassoHomotopy homotopy_;
    Eigen::VectorXd coeffs_;
    SparseConformalOptions opts_;
    std::size_t n_;
    double rho_ = 1.0;
};

inline PredictionInterval full_conformal_sparse(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                                const Eigen::Ref<const Eigen::VectorXd>& y, const SparseFit& model,
                                                const Eigen::Ref<const Row>& phi, Level level,
                                                const SparseConformalOptions& opts = {}) {
    return FullConformalSparse(psi, y, model, opts).interval(phi, level);
}

/// Slow reference for sparse full conformal: at every trial response, plain
/// LARS on the augmented data truncated at the model's support size, then an
/// OLS refit; scores are the refit residuals.
class FullConformalSparseReference {
public:
    FullConformalSparseReference(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                 const Eigen::Ref<const Eigen::VectorXd>& y, const SparseFit& model,
                                 SparseConformalOptions opts = {})
        : psi_(psi), y_(y), coeffs_(model.coeffs), k_(model.active.size()), opts_(opts),
          n_(static_cast<std::size_t>(psi.rows())) {
        rho_ = detail::residual_scale(y_ - psi_ * coeffs_);
    }

    std::vector<PredictionInterval> intervals(const Eigen::Ref<const Row>& phi, std::span<const Level> levels) const {
        const Eigen::Index n = psi_.rows();
        auto aug_psi = std::make_shared<Eigen::MatrixXd>(n + 1, psi_.cols());
        aug_psi->topRows(n) = psi_;
        aug_psi->row(n) = phi;
        auto make = [&](double, double) -> std::function<Eigen::VectorXd(double)> {
            return [this, aug_psi, n](double t) {
                Eigen::VectorXd y_aug(n + 1);
                y_aug.head(n) = y_;
                y_aug[n] = t;
                const Eigen::VectorXd c = refit_at_count(*aug_psi, y_aug, k_);
                return Eigen::VectorXd(y_aug - *aug_psi * c);
            };
        };
        const double centre = phi.dot(coeffs_);
        return detail::search_bounds(make, n_, centre, centre, rho_, levels, opts_);
    }

private:
    Eigen::MatrixXd psi_;
    Eigen::VectorXd y_;
    Eigen::VectorXd coeffs_;
    std::size_t k_;
    SparseConformalOptions opts_;
    std::size_t n_;
    double rho_ = 1.0;
};

// ---------------------------------------------------------------- Jackknife+

/// Jackknife+ from n leave-one-out models (columns of `loo_coeffs`) and their
/// signed leave-one-out residuals y_i - M_{-i}(x_i).
class JackknifePlus {
public:
    JackknifePlus(Eigen::MatrixXd loo_coeffs, Eigen::VectorXd loo_residuals, Symmetry symmetry = Symmetry::Asymmetric)
        : coeffs_(std::move(loo_coeffs)), resid_(std::move(loo_residuals)), symmetry_(symmetry) {
        if (coeffs_.cols() != resid_.size() || resid_.size() == 0) {
            throw ConfigError("leave-one-out models and residuals disagree in count");
        }
    }

    std::vector<PredictionInterval> intervals(const Eigen::Ref<const Row>& phi, std::span<const Level> levels) const {
        const Eigen::VectorXd mu = (phi * coeffs_).transpose();
        return from_predictions(mu, levels);
    }

    /// Intervals from the n leave-one-out predictions at the query point.
    std::vector<PredictionInterval> from_predictions(const Eigen::VectorXd& mu, std::span<const Level> levels) const {
        const auto n = static_cast<std::size_t>(mu.size());
        std::vector<double> lo(n), hi(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            if (symmetry_ == Symmetry::Symmetric) {
                lo[i] = mu[k] - std::abs(resid_[k]);
                hi[i] = mu[k] + std::abs(resid_[k]);
            } else {
                lo[i] = hi[i] = mu[k] + resid_[k];
            }
        }
        std::vector<PredictionInterval> out;
        for (auto l : levels) {
            const Level q = symmetry_ == Symmetry::Symmetric ? l : l.half();
            out.push_back({q_minus(lo, q), q_plus(hi, q)});
        }
        return out;
    }

    const Eigen::MatrixXd& loo_coeffs() const noexcept { return coeffs_; }
    const Eigen::VectorXd& loo_residuals() const noexcept { return resid_; }

private:
    Eigen::MatrixXd coeffs_;
    Eigen::VectorXd resid_;
    Symmetry symmetry_;
};

/// Jackknife+ for OLS PCE via the analytic leave-one-out formulas.
inline JackknifePlus jackknife_plus_ols(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                        const Eigen::Ref<const Eigen::VectorXd>& y,
                                        Symmetry symmetry = Symmetry::Asymmetric) {
    const OlsFit fit = ols_fit(psi, y);
    return JackknifePlus(loo_models(fit.gram, psi, y), loo_residuals(fit.gram, psi, y, fit.coeffs), symmetry);
}

inline Eigen::MatrixXd drop_row(const Eigen::Ref<const Eigen::MatrixXd>& m, Eigen::Index i) {
    Eigen::MatrixXd out(m.rows() - 1, m.cols());
    out.topRows(i) = m.topRows(i);
    out.bottomRows(m.rows() - 1 - i) = m.bottomRows(m.rows() - 1 - i);
    return out;
}

inline Eigen::VectorXd drop_entry(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::Index i) {
    Eigen::VectorXd out(v.size() - 1);
    out.head(i) = v.head(i);
    out.tail(v.size() - 1 - i) = v.tail(v.size() - 1 - i);
    return out;
}

/// Jackknife+ for sparse PCE: an independent Hybrid-LARS fit per left-out point.
inline JackknifePlus jackknife_plus_sparse(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                           const Eigen::Ref<const Eigen::VectorXd>& y,
                                           Symmetry symmetry = Symmetry::Asymmetric,
                                           LooCriterion criterion = LooCriterion::Corrected) {
    const Eigen::Index n = psi.rows();
    Eigen::MatrixXd coeffs(psi.cols(), n);
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const SparseFit fit = fit_hybrid_lars(drop_row(psi, i), drop_entry(y, i), criterion);
        coeffs.col(i) = fit.coeffs;
        resid[i] = y[i] - psi.row(i).dot(fit.coeffs);
    }
    return JackknifePlus(std::move(coeffs), std::move(resid), symmetry);
}

/// Explicit-refit Jackknife+ for OLS (n separate least-squares fits).
inline JackknifePlus jackknife_plus_ols_refit(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                              const Eigen::Ref<const Eigen::VectorXd>& y,
                                              Symmetry symmetry = Symmetry::Asymmetric) {
    const Eigen::Index n = psi.rows();
    Eigen::MatrixXd coeffs(psi.cols(), n);
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        coeffs.col(i) = ols_fit(drop_row(psi, i), drop_entry(y, i)).coeffs;
        resid[i] = y[i] - psi.row(i).dot(coeffs.col(i));
    }
    return JackknifePlus(std::move(coeffs), std::move(resid), symmetry);
}

// ---------------------------------------------------------------- bootstrap

/// Percentile bootstrap over B surrogates fitted on with-replacement resamples.
class Bootstrap {
public:
    explicit Bootstrap(Eigen::MatrixXd coeffs, std::size_t jittered = 0)
        : coeffs_(std::move(coeffs)), jittered_(jittered) {
        if (coeffs_.cols() < 2) throw ConfigError("bootstrap needs B >= 2");
    }

    std::vector<PredictionInterval> intervals(const Eigen::Ref<const Row>& phi, std::span<const Level> levels) const {
        const Eigen::VectorXd pred = (phi * coeffs_).transpose();
        const std::vector<double> v(pred.data(), pred.data() + pred.size());
        std::vector<PredictionInterval> out;
        for (auto l : levels) out.push_back({q_minus(v, l.half()), q_plus(v, l.half())});
        return out;
    }

    const Eigen::MatrixXd& coeffs() const noexcept { return coeffs_; }
    /// Resamples that needed the ridge-jittered Gram.
    std::size_t jittered() const noexcept { return jittered_; }

private:
    Eigen::MatrixXd coeffs_;
    std::size_t jittered_;
};

enum class BootstrapFit { Ols, HybridLars };

inline Bootstrap bootstrap(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y,
                           std::size_t b, BootstrapFit kind, std::uint64_t seed,
                           LooCriterion criterion = LooCriterion::Corrected) {
    if (b < 2) throw ConfigError("bootstrap needs B >= 2");
    const Eigen::Index n = psi.rows();
    Rng rng(seed);
    Eigen::MatrixXd coeffs(psi.cols(), static_cast<Eigen::Index>(b));
    std::size_t jittered = 0;
    Eigen::MatrixXd ps(n, psi.cols());
    Eigen::VectorXd ys(n);
    LarsOptions lars;
    lars.criterion = criterion;
    std::vector<char> seen(static_cast<std::size_t>(n));
    for (std::size_t s = 0; s < b; ++s) {
        std::fill(seen.begin(), seen.end(), 0);
        Eigen::Index distinct = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
            ps.row(i) = psi.row(k);
            ys[i] = y[k];
            if (!seen[static_cast<std::size_t>(k)]) ++distinct;
            seen[static_cast<std::size_t>(k)] = 1;
        }
        const auto col = static_cast<Eigen::Index>(s);
        if (kind == BootstrapFit::Ols) {
            try {
                coeffs.col(col) = ols_fit(ps, ys).coeffs;
            } catch (const NumericalError&) {
                coeffs.col(col) = ridge_jitter_fit(ps, ys).coeffs;
                ++jittered;
            }
        } else {
            // repeated rows cap the rank of the resampled design
            const auto steps = static_cast<std::size_t>(std::min(distinct - 1, psi.cols()));
            coeffs.col(col) = hybrid_select(lars_path(ps, ys, steps, lars)).coeffs;
        }
    }
    return Bootstrap(std::move(coeffs), jittered);
}

inline PredictionInterval bootstrap_interval(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                             const Eigen::Ref<const Eigen::VectorXd>& y,
                                             const Eigen::Ref<const Row>& phi, Level level, std::size_t b,
                                             BootstrapFit kind, std::uint64_t seed) {
    const Level one[] = {level};
    return bootstrap(psi, y, b, kind, seed).intervals(phi, one).front();
}

}  // namespace cpce
