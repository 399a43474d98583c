#pragma once

// Oracle equivalence suite: each fast path against its slow reference on
// random Ishigami designs. Shared by the CLI self-test and the acceptance run.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpce/basis.hpp"
#include "cpce/benchmarks.hpp"
#include "cpce/conformal.hpp"
#include "cpce/homotopy.hpp"
#include "cpce/lars.hpp"
#include "cpce/ols.hpp"
#include "cpce/rng.hpp"
#include "cpce/testing/oracles.hpp"

namespace cpce::testing {

struct OracleCheck {
    std::string name;
    double discrepancy = 0.0;  // worst observed, in the unit of `tolerance`
    double tolerance = 0.0;
    bool passed = false;
};

struct IshigamiProblem {
    Eigen::MatrixXd psi;
    Eigen::VectorXd y;
    PceBasis basis;
};

inline IshigamiProblem ishigami_problem(int degree, std::size_t n, std::uint64_t seed) {
    const auto bm = benchmark_registry("ishigami");
    PceBasis basis(bm.input, degree);
    const Eigen::MatrixXd x = sample_lhs(bm.input, n, seed);
    return {basis.matrix(x), bm.evaluate_rows(x), basis};
}

/// Full conformal OLS against the grid refit search; worst gap in grid cells.
inline OracleCheck check_full_conformal_grid(std::uint64_t seed, std::size_t queries = 20, std::size_t grid = 100000) {
    const auto prob = ishigami_problem(3, 60, derive_seed(seed, 10));
    const auto bm = benchmark_registry("ishigami");
    const Eigen::MatrixXd xq = sample_mc(bm.input, queries, derive_seed(seed, 11));
    const OlsFit fit = ols_fit(prob.psi, prob.y);
    const double spread = (prob.y.array() - prob.y.mean()).abs().maxCoeff();
    double worst = 0.0;
    for (std::size_t q = 0; q < queries; ++q) {
        const Eigen::RowVectorXd phi = prob.basis.row(xq.row(static_cast<Eigen::Index>(q)).transpose());
        const Symmetry sym = q % 2 == 0 ? Symmetry::Asymmetric : Symmetry::Symmetric;
        const Level level(0.1);
        const auto fast = FullConformalOls(prob.psi, prob.y, fit, sym).interval(phi, level);
        const double centre = phi.dot(fit.coeffs);
        // high-leverage queries can reach past the default window
        double lo = centre - 4.0 * spread, hi = centre + 4.0 * spread;
        if (fast.bounded()) {
            lo = std::min(lo, fast.lower - spread);
            hi = std::max(hi, fast.upper + spread);
        }
        const auto slow = grid_full_conformal(prob.psi, prob.y, phi, level, sym, lo, hi, grid);
        const double cell = (hi - lo) / static_cast<double>(grid - 1);
        worst = std::max({worst, std::abs(fast.lower - slow.lower) / cell, std::abs(fast.upper - slow.upper) / cell});
    }
    return {"full_conformal_ols == grid search (cells)", worst, 1.0, worst <= 1.0};
}

/// Analytic leave-one-out residuals and models against explicit refits.
inline OracleCheck check_loo(std::uint64_t seed) {
    const auto prob = ishigami_problem(3, 60, derive_seed(seed, 20));
    const OlsFit fit = ols_fit(prob.psi, prob.y);
    const auto ex = explicit_loo(prob.psi, prob.y);
    const double dr = (loo_residuals(fit.gram, prob.psi, prob.y, fit.coeffs) - ex.residuals).cwiseAbs().maxCoeff();
    const double dm = (loo_models(fit.gram, prob.psi, prob.y) - ex.coeffs).cwiseAbs().maxCoeff();
    const double worst = std::max(dr, dm);
    return {"loo_residuals/loo_models == explicit refits", worst, 1e-8, worst <= 1e-8};
}

/// Sherman-Morrison augmented inverse against a direct LU inverse.
inline OracleCheck check_sm_augment(std::uint64_t seed, std::size_t rows = 20) {
    const auto prob = ishigami_problem(3, 60, derive_seed(seed, 30));
    const auto bm = benchmark_registry("ishigami");
    const Eigen::MatrixXd xq = sample_mc(bm.input, rows, derive_seed(seed, 31));
    const OlsFit fit = ols_fit(prob.psi, prob.y);
    double worst = 0.0;
    for (std::size_t q = 0; q < rows; ++q) {
        const Eigen::RowVectorXd phi = prob.basis.row(xq.row(static_cast<Eigen::Index>(q)).transpose());
        const Gram g = sm_augment(fit.gram, phi);
        worst = std::max(worst, (g.inverse - direct_augmented_inverse(prob.psi, phi)).cwiseAbs().maxCoeff());
    }
    return {"sm_augment == direct inverse", worst, 1e-8, worst <= 1e-8};
}

/// Homotopy path coefficients against coordinate-descent LASSO on the augmented data.
inline OracleCheck check_homotopy(std::uint64_t seed, std::size_t trials = 20) {
    const auto prob = ishigami_problem(4, 40, derive_seed(seed, 40));
    const auto bm = benchmark_registry("ishigami");
    const SparseFit fit = fit_hybrid_lars(prob.psi, prob.y);
    const Eigen::RowVectorXd phi = prob.basis.row(sample_mc(bm.input, 1, derive_seed(seed, 41)).row(0).transpose());
    const double centre = phi.dot(fit.coeffs);
    const double spread = (prob.y.array() - prob.y.mean()).abs().maxCoeff();
    const auto path = homotopy_path(prob.psi, prob.y, phi, fit.lambda_hat, centre - 2.0 * spread, centre + 2.0 * spread);

    Eigen::MatrixXd aug(prob.psi.rows() + 1, prob.psi.cols());
    aug.topRows(prob.psi.rows()) = prob.psi;
    aug.row(prob.psi.rows()) = phi;
    Eigen::VectorXd y_aug(prob.y.size() + 1);
    y_aug.head(prob.y.size()) = prob.y;
    Rng rng(derive_seed(seed, 42));
    double worst = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
        const double t = path.lo() + (path.hi() - path.lo()) * rng.uniform();
        y_aug[prob.y.size()] = t;
        const auto cd = coordinate_descent_lasso(aug, y_aug, fit.lambda_hat, 1e-14);
        worst = std::max(worst, (path.coeffs(t) - cd.coeffs).cwiseAbs().maxCoeff());
    }
    return {"homotopy_path == coordinate-descent LASSO", worst, 1e-6, worst <= 1e-6};
}

/// Hybrid-LARS fit is unchanged by permuting the training rows.
inline OracleCheck check_permutation(std::uint64_t seed, std::size_t perms = 5) {
    const auto prob = ishigami_problem(4, 40, derive_seed(seed, 50));
    double worst = 0.0;
    for (std::size_t k = 0; k < perms; ++k) {
        worst = std::max(worst, permutation_discrepancy(prob.psi, prob.y, derive_seed(seed, 51 + k)));
    }
    return {"hybrid_select permutation invariance", worst, 1e-10, worst <= 1e-10};
}

inline std::vector<OracleCheck> run_oracle_suite(std::uint64_t seed) {
    return {check_full_conformal_grid(seed), check_loo(seed), check_sm_augment(seed), check_homotopy(seed),
            check_permutation(seed)};
}

}  // namespace cpce::testing
