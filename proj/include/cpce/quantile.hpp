#pragma once

// Finite-sample order-statistic quantiles and prediction intervals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cpce/errors.hpp"

namespace cpce {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Miscoverage level alpha in (0, 1).
class Level {
public:
    explicit Level(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    }
    static Level from_confidence(double confidence) { return Level(1.0 - confidence); }

    double alpha() const noexcept { return alpha_; }
    double confidence() const noexcept { return 1.0 - alpha_; }
    Level half() const { return Level(0.5 * alpha_); }

private:
    double alpha_;
};

/// Closed interval; infinite bounds are the unbounded markers.
struct PredictionInterval {
    double lower = -kInf;
    double upper = kInf;

    bool bounded() const noexcept { return std::isfinite(lower) && std::isfinite(upper); }
    double length() const noexcept { return upper - lower; }
    bool contains(double y) const noexcept { return lower <= y && y <= upper; }

    friend bool operator==(const PredictionInterval&, const PredictionInterval&) = default;
};

namespace detail {
// Order-statistic ranks computed from products like (1 - alpha)(n + 1) must
// not flip because 1 - 0.9 is 0.09999999999999998; snap within 1e-9.
inline long long ceil_rank(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<long long>(r);
    return static_cast<long long>(std::ceil(x));
}
inline long long floor_rank(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<long long>(r);
    return static_cast<long long>(std::floor(x));
}
}  // namespace detail

/// Rank ceil((1 - alpha)(k + 1)) used by q_plus; may exceed k.
inline long long upper_rank(std::size_t k, Level level) {
    return detail::ceil_rank(level.confidence() * static_cast<double>(k + 1));
}

/// Rank floor(alpha (k + 1)) used by q_minus; may be 0.
inline long long lower_rank(std::size_t k, Level level) {
    return detail::floor_rank(level.alpha() * static_cast<double>(k + 1));
}

/// r-th smallest value (1-based) of a scratch copy.
inline double order_statistic(std::vector<double> values, long long rank) {
    const auto it = values.begin() + (rank - 1);
    std::nth_element(values.begin(), it, values.end());
    return *it;
}

/// The ceil((1-alpha)(k+1))-th smallest value, or +inf when that rank exceeds k.
inline double q_plus(std::span<const double> values, Level level) {
    if (values.empty()) throw ConfigError("quantile of an empty set");
    const auto rank = upper_rank(values.size(), level);
    if (rank > static_cast<long long>(values.size())) return kInf;
    return order_statistic(std::vector<double>(values.begin(), values.end()), std::max(rank, 1LL));
}

/// The floor(alpha(k+1))-th smallest value, or -inf when that rank is 0.
inline double q_minus(std::span<const double> values, Level level) {
    if (values.empty()) throw ConfigError("quantile of an empty set");
    const auto rank = lower_rank(values.size(), level);
    if (rank < 1) return -kInf;
    return order_statistic(std::vector<double>(values.begin(), values.end()),
                           std::min(rank, static_cast<long long>(values.size())));
}

enum class Symmetry { Symmetric, Asymmetric };

inline std::string to_string(Symmetry s) { return s == Symmetry::Symmetric ? "symmetric" : "asymmetric"; }

}  // namespace cpce
