#pragma once

// Independent-marginal input models, experimental designs and the map to the
// standardized space in which the orthonormal polynomial families live.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "cpce/errors.hpp"
#include "cpce/rng.hpp"

namespace cpce {

enum class MarginalKind { Uniform, Gaussian, Lognormal };

/// Polynomial family that is orthonormal in the standardized space of a marginal.
enum class PolyFamily { Legendre, Hermite };

/// One input marginal.
///
/// Parameters by kind:
///   Uniform(min, max)          first = min, second = max
///   Gaussian(mean, std)        first = mean, second = std
///   Lognormal(lambda, xi)      first/second = mean/std of ln X
class Marginal {
public:
    static Marginal uniform(double min, double max) {
        if (!(max > min)) throw ConfigError("Uniform marginal requires max > min");
        return Marginal(MarginalKind::Uniform, min, max);
    }
    static Marginal gaussian(double mean, double std) {
        if (!(std > 0.0)) throw ConfigError("Gaussian marginal requires std > 0");
        return Marginal(MarginalKind::Gaussian, mean, std);
    }
    static Marginal lognormal(double log_mean, double log_std) {
        if (!(log_std > 0.0)) throw ConfigError("Lognormal marginal requires xi > 0");
        return Marginal(MarginalKind::Lognormal, log_mean, log_std);
    }

    MarginalKind kind() const noexcept { return kind_; }
    double first() const noexcept { return first_; }
    double second() const noexcept { return second_; }

    PolyFamily family() const noexcept {
        return kind_ == MarginalKind::Uniform ? PolyFamily::Legendre : PolyFamily::Hermite;
    }

    bool in_support(double x) const noexcept {
        switch (kind_) {
            case MarginalKind::Uniform: return x >= first_ && x <= second_;
            case MarginalKind::Gaussian: return std::isfinite(x);
            case MarginalKind::Lognormal: return std::isfinite(x) && x > 0.0;
        }
        return false;
    }

    /// Inverse CDF for u in (0, 1).
    double quantile(double u) const {
        switch (kind_) {
            case MarginalKind::Uniform: return first_ + u * (second_ - first_);
            case MarginalKind::Gaussian: return first_ + second_ * standard_normal_quantile(u);
            case MarginalKind::Lognormal:
                return std::exp(first_ + second_ * standard_normal_quantile(u));
        }
        return 0.0;
    }

    double cdf(double x) const {
        switch (kind_) {
            case MarginalKind::Uniform:
                if (x <= first_) return 0.0;
                if (x >= second_) return 1.0;
                return (x - first_) / (second_ - first_);
            case MarginalKind::Gaussian:
                return standard_normal_cdf((x - first_) / second_);
            case MarginalKind::Lognormal:
                if (x <= 0.0) return 0.0;
                return standard_normal_cdf((std::log(x) - first_) / second_);
        }
        return 0.0;
    }

    /// Physical value to standardized coordinate: [-1, 1] for uniform, N(0,1) otherwise.
    double to_standard(double x) const {
        if (!in_support(x)) {
            throw DomainError("value " + std::to_string(x) + " outside marginal support");
        }
        switch (kind_) {
            case MarginalKind::Uniform: return 2.0 * (x - first_) / (second_ - first_) - 1.0;
            case MarginalKind::Gaussian: return (x - first_) / second_;
            case MarginalKind::Lognormal: return (std::log(x) - first_) / second_;
        }
        return 0.0;
    }

    double from_standard(double z) const {
        switch (kind_) {
            case MarginalKind::Uniform: return first_ + 0.5 * (z + 1.0) * (second_ - first_);
            case MarginalKind::Gaussian: return first_ + second_ * z;
            case MarginalKind::Lognormal: return std::exp(first_ + second_ * z);
        }
        return 0.0;
    }

    static double standard_normal_quantile(double u) {
        static const boost::math::normal_distribution<double> n01;
        return boost::math::quantile(n01, u);
    }
    static double standard_normal_cdf(double z) {
        return 0.5 * std::erfc(-z / std::sqrt(2.0));
    }

    friend bool operator==(const Marginal&, const Marginal&) = default;

private:
    Marginal(MarginalKind kind, double first, double second)
        : kind_(kind), first_(first), second_(second) {}

    MarginalKind kind_;
    double first_;
    double second_;
};

/// Independent input vector X (no copula).
class InputModel {
public:
    explicit InputModel(std::vector<Marginal> marginals) : marginals_(std::move(marginals)) {
        if (marginals_.empty()) throw ConfigError("input model needs at least one marginal");
    }

    std::size_t dimension() const noexcept { return marginals_.size(); }
    const std::vector<Marginal>& marginals() const noexcept { return marginals_; }
    const Marginal& operator[](std::size_t k) const { return marginals_.at(k); }

    Eigen::VectorXd to_standard(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        check_dim(x.size());
        Eigen::VectorXd u(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            u[k] = marginals_[static_cast<std::size_t>(k)].to_standard(x[k]);
        }
        return u;
    }

    Eigen::VectorXd from_standard(const Eigen::Ref<const Eigen::VectorXd>& u) const {
        check_dim(u.size());
        Eigen::VectorXd x(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            x[k] = marginals_[static_cast<std::size_t>(k)].from_standard(u[k]);
        }
        return x;
    }

    bool in_support(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (static_cast<std::size_t>(x.size()) != dimension()) return false;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            if (!marginals_[static_cast<std::size_t>(k)].in_support(x[k])) return false;
        }
        return true;
    }

    friend bool operator==(const InputModel&, const InputModel&) = default;

private:
    void check_dim(Eigen::Index size) const {
        if (static_cast<std::size_t>(size) != dimension()) {
            throw DomainError("point has dimension " + std::to_string(size) + ", model has " +
                              std::to_string(dimension()));
        }
    }

    std::vector<Marginal> marginals_;
};

/// Points (n x M, physical space) with their model responses.
struct ExperimentalDesign {
    Eigen::MatrixXd points;
    Eigen::VectorXd responses;

    Eigen::Index size() const noexcept { return points.rows(); }
};

/// i.i.d. Monte Carlo sample, drawn row by row through the marginal quantiles.
inline Eigen::MatrixXd sample_mc(const InputModel& model, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("sample size must be >= 1");
    Rng rng(seed);
    const auto m = model.dimension();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            x(i, static_cast<Eigen::Index>(k)) = model[k].quantile(rng.uniform());
        }
    }
    return x;
}

/// Latin hypercube sample: each column has exactly one point per equiprobable
/// stratum, uniform jitter inside the stratum, independent permutation per column.
inline Eigen::MatrixXd sample_lhs(const InputModel& model, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("sample size must be >= 1");
    Rng rng(seed);
    const auto m = model.dimension();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    const double width = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < m; ++k) {
        const auto strata = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i) {
            // rounding can push the top stratum onto 1.0
            const double u = std::min((static_cast<double>(strata[i]) + rng.uniform()) * width,
                                      1.0 - 0x1.0p-53);
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = model[k].quantile(u);
        }
    }
    return x;
}

}  // namespace cpce
