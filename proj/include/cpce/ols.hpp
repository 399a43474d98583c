#pragma once

// Least-squares PCE fitting and the rank-one kernels used by the conformal
// engines: Sherman-Morrison updates of the inverse Gram matrix and analytic
// leave-one-out residuals / models.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpce/basis.hpp"
#include "cpce/errors.hpp"

namespace cpce {

inline constexpr double kMaxGramCondition = 1e12;
inline constexpr double kLeverageTolerance = 1e-10;
inline constexpr double kShermanMorrisonTolerance = 1e-12;

/// Gram matrix M = Psi^T Psi with its explicit inverse.
///
/// `h` holds the diagonal of I - Psi M^{-1} Psi^T for the design the Gram was
/// built from (each entry in (0, 1]); it is empty after a rank-one update.
struct Gram {
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd inverse;
    Eigen::VectorXd h;
};

struct OlsFit {
    Eigen::VectorXd coeffs;
    Gram gram;
    Eigen::VectorXd residuals;  // y - Psi c
};

/// PCE surrogate: coefficients over a basis.
class PceModel {
public:
    PceModel(PceBasis basis, Eigen::VectorXd coeffs) : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
        if (static_cast<std::size_t>(coeffs_.size()) != basis_.size()) {
            throw ConfigError("coefficient count does not match basis size");
        }
    }

    const PceBasis& basis() const noexcept { return basis_; }
    const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }

    double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const { return basis_.row(x).dot(coeffs_); }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
        return basis_.matrix(points) * coeffs_;
    }

private:
    PceBasis basis_;
    Eigen::VectorXd coeffs_;
};

inline Eigen::VectorXd predict(const PceModel& model, const Eigen::Ref<const Eigen::MatrixXd>& points) {
    return model.predict(points);
}

/// Ordinary least squares by column-pivoted QR.
///
/// Throws NumericalError when n < P or the Gram condition estimate exceeds 1e12;
/// the message lists the columns the pivoting pushed to the rank-deficient tail.
inline OlsFit ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y) {
    const Eigen::Index n = psi.rows();
    const Eigen::Index p = psi.cols();
    if (y.size() != n) throw ConfigError("response length does not match regression matrix rows");
    if (p == 0) throw ConfigError("empty regression matrix");
    if (n < p) {
        throw NumericalError("OLS needs n >= P (n=" + std::to_string(n) + ", P=" + std::to_string(p) + ")");
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(psi);
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    const double r_max = std::abs(r(0, 0));
    const auto& perm = qr.colsPermutation().indices();
    std::vector<Eigen::Index> weak;
    double r_min = r_max;
    for (Eigen::Index k = 0; k < p; ++k) {
        const double rk = std::abs(r(k, k));
        r_min = std::min(r_min, rk);
        if (!(rk * std::sqrt(kMaxGramCondition) > r_max)) weak.push_back(perm[k]);
    }
    if (r_max == 0.0 || !weak.empty()) {
        std::string cols;
        for (auto c : weak) cols += (cols.empty() ? "" : ",") + std::to_string(c);
        throw NumericalError("ill-conditioned Gram matrix (condition > 1e12); offending columns: " + cols);
    }

    // M^{-1} = Pi R^{-1} R^{-T} Pi^T
    const Eigen::MatrixXd r_inv =
        r.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd inv_perm = r_inv * r_inv.transpose();
    Eigen::MatrixXd inverse(p, p);
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = 0; b < p; ++b) inverse(perm[a], perm[b]) = inv_perm(a, b);
    }

    OlsFit fit;
    fit.coeffs = qr.solve(y);
    fit.residuals = y - psi * fit.coeffs;
    fit.gram.matrix = psi.transpose() * psi;
    fit.gram.inverse = std::move(inverse);
    // leverage = squared row norms of the thin Q factor
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    fit.gram.h = Eigen::VectorXd::Ones(n) - q.rowwise().squaredNorm();
    return fit;
}

/// Least squares on the ridge-jittered Gram M + tau I with tau = 1e-8 trace(M)/P.
/// Used for resamples whose design is rank deficient.
inline OlsFit ridge_jitter_fit(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                               const Eigen::Ref<const Eigen::VectorXd>& y) {
    const Eigen::Index p = psi.cols();
    OlsFit fit;
    fit.gram.matrix = psi.transpose() * psi;
    const double tau = 1e-8 * fit.gram.matrix.trace() / static_cast<double>(p);
    const Eigen::MatrixXd jittered = fit.gram.matrix + tau * Eigen::MatrixXd::Identity(p, p);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(jittered);
    if (ldlt.info() != Eigen::Success) throw NumericalError("ridge-jittered Gram factorization failed");
    fit.gram.inverse = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    fit.coeffs = ldlt.solve(psi.transpose() * y);
    fit.residuals = y - psi * fit.coeffs;
    return fit;
}

namespace detail {
inline Gram rank_one(const Gram& g, const Eigen::Ref<const Eigen::RowVectorXd>& phi, double sign) {
    if (phi.size() != g.inverse.rows()) throw ConfigError("update row has wrong length");
    const Eigen::VectorXd u = g.inverse * phi.transpose();
    const double denom = 1.0 + sign * phi.dot(u);
    if (!(denom > kShermanMorrisonTolerance)) {
        throw NumericalError("singular rank-one update (denominator " + std::to_string(denom) + ")");
    }
    Gram out;
    out.matrix = g.matrix + sign * phi.transpose() * phi;
    out.inverse = g.inverse - (sign / denom) * u * u.transpose();
    return out;
}
}  // namespace detail

/// Inverse Gram of the design with row `phi` appended (Sherman-Morrison).
inline Gram sm_augment(const Gram& g, const Eigen::Ref<const Eigen::RowVectorXd>& phi) {
    return detail::rank_one(g, phi, +1.0);
}

/// Inverse Gram of the design with row `phi` removed.
inline Gram sm_downdate(const Gram& g, const Eigen::Ref<const Eigen::RowVectorXd>& phi) {
    return detail::rank_one(g, phi, -1.0);
}

inline void check_leverage(const Eigen::VectorXd& h) {
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        if (!(h[i] > kLeverageTolerance)) {
            throw DegenerateLeverageError(static_cast<std::size_t>(i),
                                          "training point " + std::to_string(i) +
                                              " has leverage 1; leave-one-out fit undefined");
        }
    }
}

/// Signed leave-one-out residuals y_i - M_{-i}(x_i) = (y_i - phi_i c) / h_i.
inline Eigen::VectorXd loo_residuals(const Gram& g, const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                     const Eigen::Ref<const Eigen::VectorXd>& y,
                                     const Eigen::Ref<const Eigen::VectorXd>& c) {
    if (g.h.size() != psi.rows()) throw ConfigError("Gram carries no hat diagonal for this design");
    check_leverage(g.h);
    return (y - psi * c).cwiseQuotient(g.h);
}

/// Leave-one-out coefficient vectors, one column per removed point (P x n).
///
/// c^(i) = c - M^{-1} phi_i^T (y_i - phi_i c) / h_i, which is the downdated
/// inverse applied to the reduced normal equations.
inline Eigen::MatrixXd loo_models(const Gram& g, const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                  const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (g.h.size() != psi.rows()) throw ConfigError("Gram carries no hat diagonal for this design");
    check_leverage(g.h);
    const Eigen::VectorXd c = g.inverse * (psi.transpose() * y);
    const Eigen::VectorXd scaled = (y - psi * c).cwiseQuotient(g.h);
    const Eigen::MatrixXd u = g.inverse * psi.transpose();  // P x n, column i = M^{-1} phi_i^T
    Eigen::MatrixXd out = u * (-scaled).asDiagonal();
    out.colwise() += c;
    return out;
}

}  // namespace cpce
