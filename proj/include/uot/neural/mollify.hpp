#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "uot/monge_ampere.hpp" // detail::interp_grid
#include "uot/neural/quadrature.hpp"

namespace uot::neural {

// Standard bump profile S(u) = exp(1/(|u|^2 - 1)) on the unit ball.
template <typename Scalar>
Scalar bump_profile(Scalar r2) {
    if (r2 >= Scalar(1)) return Scalar(0);
    return std::exp(Scalar(1) / (r2 - Scalar(1)));
}

// Mollifier of a grid function, evaluated anywhere: the convolution
// Gamma_{S,sigma} * u with u interpolated multilinearly inside its support
// box and extended by zero outside. The kernel is renormalized against the
// same quadrature rule, so the discrete kernel mass is exactly one and
// constants are preserved in the interior to roundoff.
template <typename Scalar>
class Mollifier {
  public:
    Mollifier(Grid<Scalar> grid, Vec<Scalar> values, Scalar sigma, int panels = 8, int order = 12)
        : grid_(std::move(grid)), values_(std::move(values)), sigma_(sigma) {
        if (!(sigma > Scalar(0))) throw InvalidParameter("mollify: width must be positive");
        const int d = grid_.dimension();
        rule_ = composite_gl<Scalar>(-sigma, sigma, panels, order);
        // kernel quadrature mass over the full ball (tensorized for d > 1)
        kernel_mass_ = Scalar(0);
        if (d == 1) {
            for (Eigen::Index i = 0; i < rule_.nodes.size(); ++i) {
                const Scalar u = rule_.nodes[i] / sigma_;
                kernel_mass_ += rule_.weights[i] * bump_profile(u * u);
            }
        } else if (d == 2) {
            for (Eigen::Index i = 0; i < rule_.nodes.size(); ++i)
                for (Eigen::Index j = 0; j < rule_.nodes.size(); ++j) {
                    const Scalar r2 =
                        (rule_.nodes[i] * rule_.nodes[i] + rule_.nodes[j] * rule_.nodes[j]) / (sigma_ * sigma_);
                    kernel_mass_ += rule_.weights[i] * rule_.weights[j] * bump_profile(r2);
                }
        } else {
            throw Unsupported("mollify: dimensions above 2 are not implemented");
        }
        Scalar min_step = grid_.axes[0].step();
        for (const auto& ax : grid_.axes) min_step = std::min(min_step, ax.step());
        under_resolved_ = sigma_ < min_step;
    }

    bool under_resolved() const { return under_resolved_; }
    Scalar sigma() const { return sigma_; }

    Scalar operator()(const Vec<Scalar>& x) const {
        const int d = grid_.dimension();
        Scalar acc = 0;
        if (d == 1) {
            for (Eigen::Index i = 0; i < rule_.nodes.size(); ++i) {
                const Scalar t = x[0] - rule_.nodes[i];
                const Scalar u = rule_.nodes[i] / sigma_;
                const Scalar k = bump_profile(u * u);
                if (k == Scalar(0)) continue;
                acc += rule_.weights[i] * k * sample1(t);
            }
        } else {
            Vec<Scalar> t(2);
            for (Eigen::Index i = 0; i < rule_.nodes.size(); ++i)
                for (Eigen::Index j = 0; j < rule_.nodes.size(); ++j) {
                    const Scalar r2 =
                        (rule_.nodes[i] * rule_.nodes[i] + rule_.nodes[j] * rule_.nodes[j]) / (sigma_ * sigma_);
                    const Scalar k = bump_profile(r2);
                    if (k == Scalar(0)) continue;
                    t[0] = x[0] - rule_.nodes[i];
                    t[1] = x[1] - rule_.nodes[j];
                    acc += rule_.weights[i] * rule_.weights[j] * k * sample(t);
                }
        }
        return acc / kernel_mass_;
    }

    // convolution values back on the grid
    Vec<Scalar> on_grid() const {
        Vec<Scalar> out(grid_.size());
        for (Eigen::Index i = 0; i < grid_.size(); ++i) out[i] = (*this)(grid_.center(i));
        return out;
    }

  private:
    Scalar sample1(Scalar t) const {
        const auto& ax = grid_.axes[0];
        if (t < ax.lo || t > ax.hi) return Scalar(0);
        Vec<Scalar> p(1);
        p[0] = t;
        return uot::detail::interp_grid(grid_, values_, p);
    }

    Scalar sample(const Vec<Scalar>& t) const {
        for (int a = 0; a < grid_.dimension(); ++a)
            if (t[a] < grid_.axes[size_t(a)].lo || t[a] > grid_.axes[size_t(a)].hi) return Scalar(0);
        return uot::detail::interp_grid(grid_, values_, t);
    }

    Grid<Scalar> grid_;
    Vec<Scalar> values_;
    Scalar sigma_;
    CompositeRule<Scalar> rule_;
    Scalar kernel_mass_{1};
    bool under_resolved_{false};
};

template <typename Scalar>
struct MollifyResult {
    Vec<Scalar> values;
    Scalar l2_distance{0};
    bool under_resolved{false};
};

// Smooth a grid function in place and report the L2 distance to the input.
template <typename Scalar>
MollifyResult<Scalar> mollify(const Grid<Scalar>& grid, const Vec<Scalar>& values, Scalar sigma) {
    Mollifier<Scalar> m(grid, values, sigma);
    MollifyResult<Scalar> out;
    out.values = m.on_grid();
    out.l2_distance = norm_l2(grid, Vec<Scalar>(out.values - values));
    out.under_resolved = m.under_resolved();
    return out;
}

// Largest width (from a geometric scan refined by bisection) whose smoothed
// field stays within eps0 of the input in L2. Sub-cell widths degenerate to
// the identity on the grid, so the search always terminates; the
// under-resolved warning is propagated.
template <typename Scalar>
MollifyResult<Scalar> mollify_to_tolerance(const Grid<Scalar>& grid, const Vec<Scalar>& values, Scalar eps0,
                                           Scalar* sigma_out = nullptr) {
    Scalar width = grid.axes[0].length();
    for (const auto& ax : grid.axes) width = std::min(width, ax.length());
    Scalar hi = width / Scalar(4);
    Scalar min_step = grid.axes[0].step();
    for (const auto& ax : grid.axes) min_step = std::min(min_step, ax.step());
    const Scalar lo_floor = min_step / Scalar(64);

    auto err_at = [&](Scalar s) { return mollify(grid, values, s); };

    MollifyResult<Scalar> best = err_at(hi);
    if (best.l2_distance <= eps0) {
        if (sigma_out) *sigma_out = hi;
        return best;
    }
    Scalar lo = hi;
    while (lo > lo_floor) {
        lo /= Scalar(2);
        best = err_at(lo);
        if (best.l2_distance <= eps0) break;
    }
    if (best.l2_distance > eps0) {
        // identity fallback: width below the grid resolution reproduces the
        // samples exactly
        best.values = values;
        best.l2_distance = Scalar(0);
        best.under_resolved = true;
        if (sigma_out) *sigma_out = lo_floor;
        return best;
    }
    // bisect for the largest admissible width in [lo, 2 lo]
    Scalar good = lo, bad = std::min(Scalar(2) * lo, hi);
    for (int it = 0; it < 20; ++it) {
        const Scalar mid = Scalar(0.5) * (good + bad);
        if (err_at(mid).l2_distance <= eps0)
            good = mid;
        else
            bad = mid;
    }
    best = err_at(good);
    if (sigma_out) *sigma_out = good;
    return best;
}

} // namespace uot::neural
