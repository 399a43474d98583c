#pragma once

// LASSO solution path in the response of one appended point.
//
// For a fixed penalty lambda, the LASSO fit on {(x_i, y_i)} + {(x*, t)} is
// piecewise affine in t. Each segment stores the active set and the affine
// coefficients / residuals, so conformal scores at any trial response are
// evaluated without refitting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpce/errors.hpp"
#include "cpce/lars.hpp"

namespace cpce {

struct HomotopySegment {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<Eigen::Index> active;  // penalized active columns (column 0 is always fitted)
    Eigen::VectorXd coeff0, coeff1;    // c(t) = coeff0 + t coeff1, length P
    Eigen::VectorXd resid0, resid1;    // r(t) = resid0 + t resid1, length n + 1 (last = new point)
};

class HomotopyPath {
public:
    HomotopyPath() = default;
    explicit HomotopyPath(std::vector<HomotopySegment> segments) : segments_(std::move(segments)) {}

    const std::vector<HomotopySegment>& segments() const noexcept { return segments_; }
    double lo() const { return segments_.front().lo; }
    double hi() const { return segments_.back().hi; }

    /// Interior segment boundaries in increasing order.
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        for (std::size_t s = 1; s < segments_.size(); ++s) out.push_back(segments_[s].lo);
        return out;
    }

    /// Segment holding t; at a shared boundary the one with fewer active columns wins.
    const HomotopySegment& segment_at(double t) const {
        if (segments_.empty()) throw ConfigError("empty homotopy path");
        auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                                   [](const HomotopySegment& s, double v) { return s.hi < v; });
        if (it == segments_.end()) return segments_.back();
        auto next = std::next(it);
        if (next != segments_.end() && t >= next->lo && next->active.size() < it->active.size()) return *next;
        return *it;
    }

    Eigen::VectorXd coeffs(double t) const {
        const auto& s = segment_at(t);
        return s.coeff0 + t * s.coeff1;
    }

    /// LASSO residuals of all n + 1 augmented points at trial response t.
    Eigen::VectorXd residuals(double t) const {
        const auto& s = segment_at(t);
        return s.resid0 + t * s.resid1;
    }

private:
    std::vector<HomotopySegment> segments_;
};

struct HomotopyOptions {
    /// Event budget relative to P before the path is declared exploded.
    std::size_t budget_factor = 10;
    /// Breakpoints closer than this times the trial-range scale are merged.
    double merge_tolerance = 1e-9;
};

/// Precomputed training quantities for repeated homotopies at one penalty.
class LassoHomotopy {
public:
    LassoHomotopy(const Eigen::Ref<const Eigen::MatrixXd>& psi, const Eigen::Ref<const Eigen::VectorXd>& y,
                  double lambda, HomotopyOptions opts = {})
        : psi_(psi), y_(y), lambda_(lambda), opts_(opts) {
        if (!(lambda >= 0.0)) throw ConfigError("LASSO penalty must be >= 0");
        gram_ = psi_.transpose() * psi_;
        psi_y_ = psi_.transpose() * y_;
        start_ = lasso_at(psi_, y_, lambda);
    }

    double lambda() const noexcept { return lambda_; }
    const Eigen::VectorXd& start_coeffs() const noexcept { return start_; }

    /// Path over trial responses in [lo, hi] for the new row phi.
    HomotopyPath path(const Eigen::Ref<const Eigen::RowVectorXd>& phi, double lo, double hi) const {
        if (!(hi > lo)) throw ConfigError("homotopy range must have hi > lo");
        if (phi.size() != psi_.cols()) throw ConfigError("new row has wrong length");
        const double scale = std::max({hi - lo, std::abs(lo), std::abs(hi), 1e-300});
        // the start point is only known to be optimal at its own prediction
        const double t0 = phi.dot(start_);
        const double run_lo = std::min(lo, t0);
        const double run_hi = std::max(hi, t0);

        std::vector<Eigen::Index> init;
        Eigen::VectorXd signs = Eigen::VectorXd::Zero(psi_.cols());
        const double coeff_tol = 1e-12 * std::max(1.0, start_.cwiseAbs().maxCoeff());
        for (Eigen::Index j = 1; j < psi_.cols(); ++j) {
            if (std::abs(start_[j]) > coeff_tol) {
                init.push_back(j);
                signs[j] = start_[j] > 0.0 ? 1.0 : -1.0;
            }
        }
        if (lambda_ == 0.0) {
            init.clear();
            for (Eigen::Index j = 1; j < psi_.cols(); ++j) init.push_back(j);
        }

        std::size_t budget = opts_.budget_factor * static_cast<std::size_t>(psi_.cols());
        auto up = sweep(phi, init, signs, t0, run_hi, +1.0, scale, budget);
        auto down = sweep(phi, init, signs, t0, run_lo, -1.0, scale, budget);
        std::vector<HomotopySegment> all;
        all.reserve(up.size() + down.size());
        auto keep = [&](HomotopySegment&& s) {
            if (s.hi < lo || s.lo > hi) return;
            s.lo = std::max(s.lo, lo);
            s.hi = std::min(s.hi, hi);
            all.push_back(std::move(s));
        };
        for (auto it = down.rbegin(); it != down.rend(); ++it) keep(std::move(*it));
        for (auto& s : up) keep(std::move(s));
        return HomotopyPath(std::move(all));
    }

private:
    struct Affine {
        Eigen::VectorXd p, q;      // full-length coefficients
        Eigen::VectorXd g0, g1;    // full-length gradient Psi_aug^T r(t)
    };

    Affine solve(const Eigen::Ref<const Eigen::RowVectorXd>& phi, const std::vector<Eigen::Index>& active,
                 const Eigen::VectorXd& signs) const {
        const auto k = static_cast<Eigen::Index>(active.size()) + 1;
        std::vector<Eigen::Index> f{0};
        f.insert(f.end(), active.begin(), active.end());
        Eigen::MatrixXd g(k, k);
        Eigen::VectorXd b(k), phi_f(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            phi_f[a] = phi[f[a]];
            b[a] = psi_y_[f[a]] - (a == 0 ? 0.0 : lambda_ * signs[f[a]]);
            for (Eigen::Index c = 0; c < k; ++c) g(a, c) = gram_(f[a], f[c]);
        }
        g += phi_f * phi_f.transpose();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
        if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
            throw NumericalError("singular active Gram along the homotopy (" + std::to_string(k) + " columns)");
        }
        const Eigen::VectorXd pf = ldlt.solve(b);
        const Eigen::VectorXd qf = ldlt.solve(phi_f);

        Affine out;
        const Eigen::Index p = psi_.cols();
        out.p = Eigen::VectorXd::Zero(p);
        out.q = Eigen::VectorXd::Zero(p);
        for (Eigen::Index a = 0; a < k; ++a) {
            out.p[f[a]] = pf[a];
            out.q[f[a]] = qf[a];
        }
        out.g0 = psi_y_ - gram_ * out.p - phi.transpose() * phi.dot(out.p);
        out.g1 = phi.transpose() - gram_ * out.q - phi.transpose() * phi.dot(out.q);
        return out;
    }

    HomotopySegment make_segment(const Eigen::Ref<const Eigen::RowVectorXd>& phi, const Affine& af,
                                 const std::vector<Eigen::Index>& active, double a, double b) const {
        HomotopySegment s;
        s.lo = std::min(a, b);
        s.hi = std::max(a, b);
        s.active = active;
        std::sort(s.active.begin(), s.active.end());
        s.coeff0 = af.p;
        s.coeff1 = af.q;
        const Eigen::Index n = psi_.rows();
        s.resid0.resize(n + 1);
        s.resid1.resize(n + 1);
        s.resid0.head(n) = y_ - psi_ * af.p;
        s.resid1.head(n) = -psi_ * af.q;
        s.resid0[n] = -phi.dot(af.p);
        s.resid1[n] = 1.0 - phi.dot(af.q);
        return s;
    }

    std::vector<HomotopySegment> sweep(const Eigen::Ref<const Eigen::RowVectorXd>& phi,
                                       std::vector<Eigen::Index> active, Eigen::VectorXd signs, double t,
                                       double target, double dir, double scale, std::size_t& budget) const {
        std::vector<HomotopySegment> out;
        const double merge = opts_.merge_tolerance * scale;
        const double boundary = lambda_ * (1.0 - 1e-9);
        Eigen::Index last_changed = -1;
        if (dir * (target - t) <= 0.0) return out;

        while (true) {
            const Affine af = solve(phi, active, signs);
            const Eigen::Index p = psi_.cols();
            std::vector<char> in_active(static_cast<std::size_t>(p), 0);
            for (auto j : active) in_active[static_cast<std::size_t>(j)] = 1;

            double best = std::numeric_limits<double>::infinity();
            Eigen::Index event = -1;
            bool event_drop = false;
            double event_sign = 0.0;
            if (lambda_ > 0.0) {
                for (auto j : active) {
                    const double cur = af.p[j] + t * af.q[j];
                    const double rate = dir * af.q[j] * signs[j];  // d(|c_j|)/d(step) while sign holds
                    if (rate >= 0.0) continue;
                    if (j == last_changed && std::abs(cur) <= merge * std::abs(af.q[j])) continue;
                    const double d = std::max(0.0, cur * signs[j] / -rate);
                    if (d < best || (d == best && j < event)) {
                        best = d;
                        event = j;
                        event_drop = true;
                    }
                }
                for (Eigen::Index j = 1; j < p; ++j) {
                    if (in_active[static_cast<std::size_t>(j)]) continue;
                    const double cur = af.g0[j] + t * af.g1[j];
                    const double rate = dir * af.g1[j];
                    if (rate == 0.0) continue;
                    const double s = rate > 0.0 ? 1.0 : -1.0;
                    if (j == last_changed && std::abs(s * cur) >= boundary) continue;
                    const double d = std::abs(s * cur) >= boundary && s * cur > 0.0
                                         ? 0.0
                                         : std::max(0.0, (lambda_ - s * cur) / std::abs(rate));
                    if (d < best || (d == best && j < event)) {
                        best = d;
                        event = j;
                        event_drop = false;
                        event_sign = s;
                    }
                }
            }

            const double remaining = dir * (target - t);
            if (event < 0 || best >= remaining) {
                out.push_back(make_segment(phi, af, active, t, target));
                return out;
            }
            if (budget == 0) {
                throw NumericalError("homotopy path exceeded its breakpoint budget (path explosion)");
            }
            --budget;
            const double t_next = t + dir * best;
            if (best > merge) out.push_back(make_segment(phi, af, active, t, t_next));
            t = t_next;
            if (event_drop) {
                active.erase(std::find(active.begin(), active.end(), event));
                signs[event] = 0.0;
            } else {
                active.push_back(event);
                signs[event] = event_sign;
            }
            last_changed = event;
        }
    }

    Eigen::MatrixXd psi_;
    Eigen::VectorXd y_;
    double lambda_;
    HomotopyOptions opts_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd psi_y_;
    Eigen::VectorXd start_;
};

inline HomotopyPath homotopy_path(const Eigen::Ref<const Eigen::MatrixXd>& psi,
                                  const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& phi, double lambda, double lo,
                                  double hi) {
    return LassoHomotopy(psi, y, lambda).path(phi, lo, hi);
}

}  // namespace cpce
