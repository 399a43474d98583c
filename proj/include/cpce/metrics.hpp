#pragma once

// Coverage, interval width, rank correlation, validation error and the
// theoretical split-conformal coverage law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/beta.hpp>

#include "cpce/errors.hpp"
#include "cpce/quantile.hpp"

namespace cpce {

/// Fraction of truths inside their (closed) interval.
inline double empirical_coverage(std::span<const PredictionInterval> intervals, std::span<const double> truths) {
    if (intervals.size() != truths.size()) throw ConfigError("coverage: interval and truth counts differ");
    if (intervals.empty()) throw ConfigError("coverage of an empty set");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) hit += intervals[i].contains(truths[i]) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(truths.size());
}

/// Squared interval length over the validation-response variance; +inf for unbounded intervals.
inline double normalized_width(const PredictionInterval& interval, double var_val) {
    if (!(var_val > 0.0)) throw ConfigError("normalized width needs a positive variance");
    if (!interval.bounded()) return kInf;
    const double len = interval.length();
    return len * len / var_val;
}

/// Ranks 1..k with ties replaced by their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t k = v.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(k);
    for (std::size_t s = 0; s < k;) {
        std::size_t e = s;
        while (e < k && v[order[e]] == v[order[s]]) ++e;
        const double avg = 0.5 * static_cast<double>(s + e - 1) + 1.0;
        for (std::size_t j = s; j < e; ++j) rank[order[j]] = avg;
        s = e;
    }
    return rank;
}

/// Spearman rank correlation; nullopt when either input is constant.
inline std::optional<double> spearman_rho(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("spearman: length mismatch");
    if (a.size() < 3) throw ConfigError("spearman needs at least 3 pairs");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Relative mean-square validation error sum (y - yhat)^2 / sum (y - mean y)^2.
inline double validation_error(const Eigen::Ref<const Eigen::VectorXd>& truth,
                               const Eigen::Ref<const Eigen::VectorXd>& prediction) {
    if (truth.size() != prediction.size()) throw ConfigError("validation error: length mismatch");
    if (truth.size() < 2) throw ConfigError("validation error needs at least 2 points");
    const double denom = (truth.array() - truth.mean()).square().sum();
    if (!(denom > 0.0)) throw ConfigError("validation responses have zero variance");
    return (truth - prediction).squaredNorm() / denom;
}

/// Sample variance (n - 1 denominator).
inline double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() < 2) throw ConfigError("variance needs at least 2 values");
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

/// Training-conditional coverage law of split conformal: Beta(n_cal + 1 - l, l), l = floor((n_cal + 1) alpha).
struct BetaLaw {
    double a = 0.0;
    double b = 0.0;

    double mean() const { return a / (a + b); }
    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return boost::math::cdf(boost::math::beta_distribution<double>(a, b), x);
    }
};

/// Throws ConfigError when l = 0 (the law degenerates to a point mass at 1).
inline BetaLaw beta_coverage_law(std::size_t n_cal, Level level) {
    const long long l = lower_rank(n_cal, level);
    if (l < 1) throw ConfigError("degenerate coverage law: floor((n_cal + 1) alpha) = 0");
    return {static_cast<double>(static_cast<long long>(n_cal) + 1 - l), static_cast<double>(l)};
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function Q(x) = 2 sum (-1)^(k-1) exp(-2 k^2 x^2).
inline double kolmogorov_survival(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, with
/// Stephens' finite-sample scaling of the statistic.
inline KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw ConfigError("KS test of an empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    const double sn = std::sqrt(n);
    return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

/// Median of finite values (empty input -> NaN).
inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

/// Empirical quantile with linear interpolation between order statistics.
inline double empirical_quantile(std::vector<double> v, double p) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= v.size()) return v.back();
    const double frac = pos - static_cast<double>(i);
    if (frac == 0.0 || v[i] == v[i + 1]) return v[i];
    return v[i] + frac * (v[i + 1] - v[i]);
}

}  // namespace cpce
