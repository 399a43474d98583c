#pragma once

// Ishigami and Borehole test functions with their canonical input models.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpce/errors.hpp"
#include "cpce/input_model.hpp"

namespace cpce {

inline constexpr double kIshigamiA = 7.0;
inline constexpr double kIshigamiB = 0.07;

inline double ishigami(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != 3) throw DomainError("ishigami takes 3 inputs");
    const double s2 = std::sin(x[1]);
    return std::sin(x[0]) + kIshigamiA * s2 * s2 + kIshigamiB * std::pow(x[2], 4) * std::sin(x[0]);
}

/// Borehole flow rate. Input order: r_w, r, T_u, H_u, T_l, H_l, L, K_w.
inline double borehole(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != 8) throw DomainError("borehole takes 8 inputs (r_w, r, T_u, H_u, T_l, H_l, L, K_w)");
    const double rw = x[0], r = x[1], tu = x[2], hu = x[3], tl = x[4], hl = x[5], l = x[6], kw = x[7];
    if (!(rw > 0.0) || !(r > rw)) throw DomainError("borehole requires r > r_w > 0");
    if (!(tl > 0.0) || !(kw > 0.0) || !(l > 0.0)) throw DomainError("borehole requires T_l, K_w, L > 0");
    const double log_ratio = std::log(r / rw);
    return 2.0 * std::numbers::pi * tu * (hu - hl) /
           (log_ratio * (1.0 + 2.0 * l * tu / (log_ratio * rw * rw * kw) + tu / tl));
}

/// How the second Gaussian parameter of r_w is read: as a standard deviation or a variance.
enum class GaussianParam { Std, Var };

inline constexpr double kBoreholeRwSpread = 0.0161812;

struct BenchmarkModel {
    std::string name;
    InputModel input;
    std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)> evaluate;

    /// Responses for every row of `points`.
    Eigen::VectorXd evaluate_rows(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
        Eigen::VectorXd y(points.rows());
        for (Eigen::Index i = 0; i < points.rows(); ++i) y[i] = evaluate(points.row(i).transpose());
        return y;
    }
};

inline BenchmarkModel benchmark_registry(const std::string& name, GaussianParam rw_param = GaussianParam::Std) {
    if (name == "ishigami") {
        std::vector<Marginal> m(3, Marginal::uniform(-std::numbers::pi, std::numbers::pi));
        return {name, InputModel(std::move(m)), ishigami};
    }
    if (name == "borehole") {
        const double rw_std = rw_param == GaussianParam::Std ? kBoreholeRwSpread : std::sqrt(kBoreholeRwSpread);
        std::vector<Marginal> m{
            Marginal::gaussian(0.10, rw_std),        // r_w
            Marginal::lognormal(7.71, 1.0056),        // r
            Marginal::uniform(63070.0, 115600.0),     // T_u
            Marginal::uniform(990.0, 1100.0),         // H_u
            Marginal::uniform(63.1, 116.0),           // T_l
            Marginal::uniform(700.0, 820.0),          // H_l
            Marginal::uniform(1120.0, 1680.0),        // L
            Marginal::uniform(9885.0, 12045.0),       // K_w
        };
        return {name, InputModel(std::move(m)), borehole};
    }
    throw ConfigError("unknown benchmark model '" + name + "'");
}

}  // namespace cpce
