#pragma once

// Total-degree multi-index sets, orthonormal univariate families and the
// regression matrix Psi(i, j) = psi_{alpha_j}(x_i).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpce/errors.hpp"
#include "cpce/input_model.hpp"

namespace cpce {

/// Degrees of the univariate factors of one multivariate polynomial.
struct MultiIndex {
    std::vector<int> degrees;

    int total() const noexcept { return std::accumulate(degrees.begin(), degrees.end(), 0); }
    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// C(m + p, p), or throws when it does not fit in size_t.
inline std::size_t total_degree_count(std::size_t m, std::size_t p) {
    // C(m+p, p) = prod_{k=1..p} (m + k) / k; every partial product is itself a binomial.
    unsigned __int128 result = 1;
    for (std::size_t k = 1; k <= p; ++k) {
        result = result * (m + k) / k;
        if (result > std::numeric_limits<std::size_t>::max()) {
            throw ConfigError("basis size C(" + std::to_string(m + p) + ", " + std::to_string(p) +
                              ") overflows the count type");
        }
    }
    return static_cast<std::size_t>(result);
}

/// All multi-indices with |alpha| <= p in graded lexicographic order: by total
/// degree, then lexicographically descending on the degree vector, so for
/// degree 1 the order is (1,0,...), (0,1,...), ... Index 0 is the constant.
inline std::vector<MultiIndex> enumerate_basis(std::size_t m, int p) {
    if (m == 0) throw ConfigError("basis dimension must be >= 1");
    if (p < 0) throw ConfigError("basis degree must be >= 0");
    const std::size_t count = total_degree_count(m, static_cast<std::size_t>(p));

    std::vector<MultiIndex> out;
    out.reserve(count);
    std::vector<int> current(m, 0);
    // place `remaining` degree units on positions k.. in descending-lex order
    std::function<void(std::size_t, int)> fill = [&](std::size_t k, int remaining) {
        if (k + 1 == m) {
            current[k] = remaining;
            out.push_back(MultiIndex{current});
            return;
        }
        for (int d = remaining; d >= 0; --d) {
            current[k] = d;
            fill(k + 1, remaining - d);
        }
        current[k] = 0;
    };
    for (int total = 0; total <= p; ++total) fill(0, total);
    return out;
}

/// Values of the orthonormal family of degrees 0..max_degree at a standardized point.
///
/// Legendre on U(-1,1): sqrt(2d+1) P_d(u). Probabilists' Hermite on N(0,1): He_d(z)/sqrt(d!).
inline Eigen::VectorXd univariate_values(PolyFamily family, int max_degree, double u) {
    Eigen::VectorXd v(max_degree + 1);
    v[0] = 1.0;
    if (max_degree == 0) return v;
    v[1] = u;
    if (family == PolyFamily::Legendre) {
        for (int d = 1; d < max_degree; ++d) {
            v[d + 1] = ((2.0 * d + 1.0) * u * v[d] - d * v[d - 1]) / (d + 1.0);
        }
        for (int d = 0; d <= max_degree; ++d) v[d] *= std::sqrt(2.0 * d + 1.0);
    } else {
        for (int d = 1; d < max_degree; ++d) v[d + 1] = u * v[d] - d * v[d - 1];
        double factorial = 1.0;
        for (int d = 1; d <= max_degree; ++d) {
            factorial *= d;
            v[d] /= std::sqrt(factorial);
        }
    }
    return v;
}

/// Candidate basis: an input model and an ordered set of multi-indices.
class PceBasis {
public:
    /// Full total-degree basis of degree p.
    PceBasis(InputModel model, int degree)
        : model_(std::move(model)), degree_(degree), indices_(enumerate_basis(model_.dimension(), degree)) {}

    PceBasis(InputModel model, int degree, std::vector<MultiIndex> indices)
        : model_(std::move(model)), degree_(degree), indices_(std::move(indices)) {
        for (const auto& a : indices_) {
            if (a.degrees.size() != model_.dimension()) throw ConfigError("multi-index dimension mismatch");
            if (a.total() > degree_ || *std::min_element(a.degrees.begin(), a.degrees.end()) < 0) {
                throw ConfigError("multi-index outside the declared degree");
            }
        }
    }

    const InputModel& model() const noexcept { return model_; }
    int degree() const noexcept { return degree_; }
    const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }

    /// Row phi(x) of basis values at a physical point.
    Eigen::RowVectorXd row(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        const Eigen::VectorXd u = model_.to_standard(x);
        const auto m = model_.dimension();
        std::vector<Eigen::VectorXd> uni(m);
        for (std::size_t k = 0; k < m; ++k) {
            uni[k] = univariate_values(model_[k].family(), degree_, u[static_cast<Eigen::Index>(k)]);
        }
        Eigen::RowVectorXd phi(static_cast<Eigen::Index>(size()));
        for (std::size_t j = 0; j < size(); ++j) {
            double value = 1.0;
            const auto& deg = indices_[j].degrees;
            for (std::size_t k = 0; k < m; ++k) {
                if (deg[k] != 0) value *= uni[k][deg[k]];
            }
            phi[static_cast<Eigen::Index>(j)] = value;
        }
        return phi;
    }

    /// Regression matrix for the rows of `points` (n x M).
    Eigen::MatrixXd matrix(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
        Eigen::MatrixXd psi(points.rows(), static_cast<Eigen::Index>(size()));
        for (Eigen::Index i = 0; i < points.rows(); ++i) psi.row(i) = row(points.row(i).transpose());
        return psi;
    }

    /// Basis restricted to a subset of its indices (order preserved as given).
    PceBasis subset(const std::vector<Eigen::Index>& columns) const {
        std::vector<MultiIndex> picked;
        picked.reserve(columns.size());
        for (auto c : columns) picked.push_back(indices_.at(static_cast<std::size_t>(c)));
        return PceBasis(model_, degree_, std::move(picked));
    }

private:
    InputModel model_;
    int degree_;
    std::vector<MultiIndex> indices_;
};

inline Eigen::RowVectorXd eval_basis_row(const PceBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return basis.row(x);
}

}  // namespace cpce
