// LARS paths, Hybrid-LARS selection, pseudo-penalty and the LASSO homotopy.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "cpce/basis.hpp"
#include "cpce/benchmarks.hpp"
#include "cpce/homotopy.hpp"
#include "cpce/lars.hpp"
#include "cpce/metrics.hpp"
#include "cpce/ols.hpp"
#include "cpce/rng.hpp"
#include "cpce/testing/oracles.hpp"
#include "cpce/testing/validation.hpp"

namespace {

using namespace cpce;
using cpce::testing::ishigami_problem;

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
    return v;
}

// [1 | Q] with Q orthonormal and orthogonal to the constant column
Eigen::MatrixXd orthonormal_design(std::uint64_t seed, Eigen::Index n, Eigen::Index q) {
    Rng rng(seed);
    Eigen::MatrixXd a(n, q + 1);
    a.col(0).setOnes();
    for (Eigen::Index j = 1; j <= q; ++j) a.col(j) = random_vector(rng, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd qm = qr.householderQ() * Eigen::MatrixXd::Identity(n, q + 1);
    Eigen::MatrixXd psi(n, q + 1);
    psi.col(0).setOnes();
    psi.rightCols(q) = qm.rightCols(q);
    return psi;
}

TEST(Lars, SingleRegressorEntersFirst) {
    const auto prob = ishigami_problem(4, 40, 3);
    for (Eigen::Index j : {1, 5, 17, 30}) {
        const Eigen::VectorXd y = 2.0 + 3.0 * prob.psi.col(j).array();
        const auto path = lars_path(prob.psi, y, 4);
        ASSERT_GE(path.steps.size(), 2u);
        EXPECT_EQ(path.steps[1].active, (std::vector<Eigen::Index>{0, j}));
    }
}

TEST(Lars, OrthonormalDesignEntryOrder) {
    const Eigen::MatrixXd psi = orthonormal_design(5, 30, 8);
    Rng rng(6);
    const Eigen::VectorXd y = random_vector(rng, 30);
    // closed form: columns enter by decreasing |Q^T y|
    const Eigen::VectorXd c = psi.rightCols(8).transpose() * y;
    std::vector<Eigen::Index> expected(8);
    std::iota(expected.begin(), expected.end(), 1);
    std::sort(expected.begin(), expected.end(),
              [&](Eigen::Index a, Eigen::Index b) { return std::abs(c[a - 1]) > std::abs(c[b - 1]); });
    const auto path = lars_path(psi, y, 9);
    const auto& last = path.steps.back().active;
    ASSERT_EQ(last.size(), 9u);
    EXPECT_EQ(std::vector<Eigen::Index>(last.begin() + 1, last.end()), expected);
}

TEST(Lars, PlainPathInvariants) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto prob = ishigami_problem(5, 50, 100 + seed);
        const auto path = lars_path(prob.psi, prob.y, 49);
        double prev_mse = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < path.steps.size(); ++s) {
            const auto& st = path.steps[s];
            EXPECT_EQ(st.active.size(), s + 1);
            EXPECT_FALSE(st.dropped);
            if (s > 0) {
                EXPECT_TRUE(std::equal(path.steps[s - 1].active.begin(), path.steps[s - 1].active.end(),
                                       st.active.begin()));
            }
            const double mse = (prob.y - prob.psi * st.lars_coeffs).squaredNorm();
            EXPECT_LE(mse, prev_mse * (1.0 + 1e-12));
            prev_mse = mse;
            // OLS refit residual is orthogonal to the active columns
            const Eigen::VectorXd r = prob.y - prob.psi * st.ols_coeffs;
            for (auto j : st.active) EXPECT_LT(std::abs(prob.psi.col(j).dot(r)), 1e-8 * prob.y.norm());
        }
    }
}

TEST(Lars, SelectionIsArgminOfCriterion) {
    for (auto criterion : {LooCriterion::Plain, LooCriterion::Corrected}) {
        const auto prob = ishigami_problem(6, 40, 7);
        LarsOptions opts;
        opts.criterion = criterion;
        const auto path = lars_path(prob.psi, prob.y, 39, opts);
        const auto n = static_cast<std::size_t>(prob.psi.rows());
        for (const auto& st : path.steps) {
            if (st.active.size() < n) EXPECT_LE(path.steps[path.selected_step].selection_error, st.selection_error);
            const double expect = criterion == LooCriterion::Plain ? st.loo_error : st.selection_error;
            EXPECT_EQ(st.selection_error, expect);
        }
        const auto fit = hybrid_select(path);
        EXPECT_EQ(fit.selected_step, path.selected_step);
        EXPECT_EQ(fit.active, path.steps[path.selected_step].active);
    }
}

TEST(Lars, CorrectedLooPenalizesLargeSets) {
    const auto prob = ishigami_problem(6, 40, 8);
    const auto path = lars_path(prob.psi, prob.y, 39);
    for (const auto& st : path.steps) {
        if (std::isfinite(st.selection_error)) EXPECT_GE(st.selection_error, st.loo_error);
    }
}

TEST(Lars, HybridSelectPicksStrictMinimum) {
    LarsPath path;
    for (double e : {3.0, 2.0, 0.5, 1.0}) {
        LarsStep st;
        st.active.assign(path.steps.size() + 1, 0);
        std::iota(st.active.begin(), st.active.end(), 0);
        st.ols_coeffs = Eigen::VectorXd::Constant(4, e);
        st.loo_error = st.selection_error = e;
        st.lambda = 10.0 - e;
        path.steps.push_back(st);
    }
    path.selected_step = 2;
    const auto fit = hybrid_select(path);
    EXPECT_EQ(fit.active.size(), 3u);
    EXPECT_EQ(fit.loo_error, 0.5);
    EXPECT_EQ(fit.lambda_hat, 9.5);
}

TEST(Lars, NoiselessSparseTargetRecovered) {
    const auto prob = ishigami_problem(4, 60, 9);
    const std::vector<Eigen::Index> support{0, 3, 7, 12, 20};
    Eigen::VectorXd c = Eigen::VectorXd::Zero(prob.psi.cols());
    c[0] = 1.0;
    c[3] = 2.0;
    c[7] = -1.0;
    c[12] = 0.5;
    c[20] = 0.25;
    const SparseFit fit = fit_hybrid_lars(prob.psi, prob.psi * c);
    for (auto j : support) EXPECT_NE(std::find(fit.active.begin(), fit.active.end(), j), fit.active.end()) << j;
    const auto bm = benchmark_registry("ishigami");
    const Eigen::MatrixXd pv = prob.basis.matrix(sample_mc(bm.input, 500, 10));
    EXPECT_LT(validation_error(pv * c, pv * fit.coeffs), 1e-8);
}

TEST(Lars, ActiveSetSizesInRange) {
    for (const char* name : {"ishigami", "borehole"}) {
        const auto bm = benchmark_registry(name);
        const int degree = std::string(name) == "ishigami" ? 6 : 2;
        const PceBasis basis(bm.input, degree);
        std::vector<double> sizes;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto x = sample_lhs(bm.input, 40, derive_seed(200, seed));
            const auto fit = fit_hybrid_lars(basis.matrix(x), bm.evaluate_rows(x));
            sizes.push_back(static_cast<double>(fit.active.size()));
        }
        const double med = median(sizes);
        EXPECT_GE(med, 10.0) << name;
        EXPECT_LE(med, 40.0) << name;
    }
}

TEST(Lars, PermutationInvariance) {
    const auto prob = ishigami_problem(5, 45, 11);
    for (std::uint64_t k = 0; k < 5; ++k) {
        EXPECT_LE(cpce::testing::permutation_discrepancy(prob.psi, prob.y, 300 + k), 1e-10);
    }
}

TEST(Lars, RejectsNonConstantFirstColumn) {
    auto prob = ishigami_problem(2, 20, 12);
    prob.psi.col(0) = prob.psi.col(1);
    EXPECT_THROW(lars_path(prob.psi, prob.y, 5), ConfigError);
}

TEST(PseudoLambda, OlsIsStationary) {
    const auto prob = ishigami_problem(3, 60, 13);
    const OlsFit fit = ols_fit(prob.psi, prob.y);
    EXPECT_LT(pseudo_lambda(prob.psi, prob.y, fit.coeffs), 1e-8 * (prob.psi.transpose() * prob.y).norm());
}

TEST(PseudoLambda, GradientAtOrigin) {
    const auto prob = ishigami_problem(3, 60, 14);
    const Eigen::VectorXd yc = prob.y.array() - prob.y.mean();
    EXPECT_NEAR(pseudo_lambda(prob.psi, yc, Eigen::VectorXd::Zero(prob.psi.cols())),
                (prob.psi.transpose() * yc).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PseudoLambda, LassoKnotsMatch) {
    const auto prob = ishigami_problem(4, 40, 15);
    LarsOptions opts;
    opts.variant = LarsVariant::LassoModified;
    opts.refit = false;
    const auto path = lars_path(prob.psi, prob.y, 20, opts);
    for (const auto& st : path.steps) {
        EXPECT_NEAR(pseudo_lambda(prob.psi, prob.y, st.lars_coeffs), st.lambda, 1e-6 * std::max(1.0, st.lambda));
        EXPECT_GE(st.lambda, 0.0);
    }
    const SparseFit fit = fit_hybrid_lars(prob.psi, prob.y);
    EXPECT_GT(fit.lambda_hat, 0.0);
}

TEST(PseudoLambda, LassoAtMatchesCoordinateDescent) {
    const auto prob = ishigami_problem(4, 40, 16);
    const double lmax = (prob.psi.rightCols(prob.psi.cols() - 1).transpose() * (prob.y.array() - prob.y.mean()).matrix())
                            .cwiseAbs()
                            .maxCoeff();
    for (double f : {0.5, 0.1, 0.02}) {
        const auto cd = cpce::testing::coordinate_descent_lasso(prob.psi, prob.y, f * lmax, 1e-12);
        EXPECT_LT((lasso_at(prob.psi, prob.y, f * lmax) - cd.coeffs).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(RefitAtCount, ReproducesHybridSelection) {
    const auto prob = ishigami_problem(5, 50, 17);
    LarsOptions plain;
    const auto path = lars_path(prob.psi, prob.y, 49, plain);
    const auto fit = hybrid_select(path);
    const Eigen::VectorXd c = refit_at_count(prob.psi, prob.y, fit.active.size());
    EXPECT_LT((c - fit.coeffs).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RefitAtCount, SingleRegressorExact) {
    const auto prob = ishigami_problem(3, 30, 18);
    const Eigen::VectorXd y = -1.0 + 4.0 * prob.psi.col(6).array();
    const Eigen::VectorXd c = refit_at_count(prob.psi, y, 2);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(prob.psi.cols());
    expect[0] = -1.0;
    expect[6] = 4.0;
    EXPECT_LT((c - expect).cwiseAbs().maxCoeff(), 1e-10);
}

// ---------------------------------------------------------------- homotopy

TEST(Homotopy, ZeroPenaltyIsAugmentedOls) {
    const auto prob = ishigami_problem(3, 60, 19);
    const auto bm = benchmark_registry("ishigami");
    const Eigen::RowVectorXd phi = prob.basis.row(sample_mc(bm.input, 1, 20).row(0).transpose());
    const OlsFit fit = ols_fit(prob.psi, prob.y);
    const Gram aug = sm_augment(fit.gram, phi);
    const auto path = homotopy_path(prob.psi, prob.y, phi, 0.0, -20.0, 20.0);
    EXPECT_GE(path.segments().size(), 1u);
    Rng rng(21);
    for (int k = 0; k < 5; ++k) {
        const double t = -20.0 + 40.0 * rng.uniform();
        const Eigen::VectorXd c = aug.inverse * (prob.psi.transpose() * prob.y + phi.transpose() * t);
        EXPECT_NEAR(phi.dot(path.coeffs(t)), phi.dot(c), 1e-8);
    }
}

TEST(Homotopy, MatchesCoordinateDescent) {
    const auto check = cpce::testing::check_homotopy(22);
    EXPECT_TRUE(check.passed) << check.discrepancy;
}

TEST(Homotopy, SegmentsStitchContinuously) {
    const auto prob = ishigami_problem(4, 40, 23);
    const auto bm = benchmark_registry("ishigami");
    const SparseFit fit = fit_hybrid_lars(prob.psi, prob.y);
    const Eigen::MatrixXd xq = sample_mc(bm.input, 5, 24);
    for (Eigen::Index q = 0; q < xq.rows(); ++q) {
        const Eigen::RowVectorXd phi = prob.basis.row(xq.row(q).transpose());
        const double centre = phi.dot(fit.coeffs);
        const auto path = homotopy_path(prob.psi, prob.y, phi, fit.lambda_hat, centre - 30.0, centre + 30.0);
        const auto& segs = path.segments();
        for (std::size_t s = 1; s < segs.size(); ++s) {
            const double t = segs[s].lo;
            EXPECT_NEAR(segs[s - 1].hi, t, 1e-12 * std::max(1.0, std::abs(t)));
            const Eigen::VectorXd left = segs[s - 1].coeff0 + t * segs[s - 1].coeff1;
            const Eigen::VectorXd right = segs[s].coeff0 + t * segs[s].coeff1;
            EXPECT_LT((left - right).cwiseAbs().maxCoeff(), 1e-8);
        }
    }
}

TEST(Homotopy, ContinuousAtCurrentPrediction) {
    const auto prob = ishigami_problem(4, 40, 25);
    const auto bm = benchmark_registry("ishigami");
    const SparseFit fit = fit_hybrid_lars(prob.psi, prob.y);
    const Eigen::RowVectorXd phi = prob.basis.row(sample_mc(bm.input, 1, 26).row(0).transpose());
    const Eigen::VectorXd start = lasso_at(prob.psi, prob.y, fit.lambda_hat);
    const double t0 = phi.dot(start);
    const auto path = homotopy_path(prob.psi, prob.y, phi, fit.lambda_hat, t0 - 5.0, t0 + 5.0);
    // at the LASSO prediction the new point has zero residual and changes nothing
    EXPECT_LT((path.coeffs(t0) - start).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((path.coeffs(t0 + 1e-7) - path.coeffs(t0 - 1e-7)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Homotopy, RejectsBadArguments) {
    const auto prob = ishigami_problem(2, 20, 27);
    EXPECT_THROW(homotopy_path(prob.psi, prob.y, prob.psi.row(0), -1.0, 0.0, 1.0), ConfigError);
    EXPECT_THROW(homotopy_path(prob.psi, prob.y, prob.psi.row(0), 0.1, 1.0, 0.0), ConfigError);
    EXPECT_THROW(homotopy_path(prob.psi, prob.y, Eigen::RowVectorXd::Ones(3), 0.1, 0.0, 1.0), ConfigError);
}

}  // namespace
