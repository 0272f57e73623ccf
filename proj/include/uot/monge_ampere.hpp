#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "uot/types.hpp"

namespace uot {

// One axis of a diagonal monotone transport map: samples T(x_i) at the
// source cell centers plus finite-difference derivatives.
template <typename Scalar>
struct AxisMap {
    GridAxis<Scalar> source;
    GridAxis<Scalar> target;
    Vec<Scalar> T;  // monotone nondecreasing samples
    Vec<Scalar> dT; // centered differences, one-sided at the boundary

    // Piecewise-linear interpolation between samples, linear extrapolation
    // at the ends with the edge-segment slope.
    Scalar apply(Scalar x) const {
        const Eigen::Index n = source.n;
        if (n == 1) return T[0];
        const Scalar h = source.step();
        Scalar pos = (x - source.center(0)) / h;
        Eigen::Index i = Eigen::Index(std::floor(pos));
        i = std::clamp<Eigen::Index>(i, 0, n - 2);
        const Scalar lam = pos - Scalar(i);
        return T[i] + lam * (T[i + 1] - T[i]);
    }

    Scalar derivative(Scalar x) const {
        const Eigen::Index n = source.n;
        if (n == 1) return dT[0];
        const Scalar h = source.step();
        Scalar pos = (x - source.center(0)) / h;
        Eigen::Index i = Eigen::Index(std::floor(pos));
        i = std::clamp<Eigen::Index>(i, 0, n - 2);
        const Scalar lam = pos - Scalar(i);
        return dT[i] + lam * (dT[i + 1] - dT[i]);
    }
};

template <typename Scalar>
void finite_difference_derivative(AxisMap<Scalar>& m) {
    const Eigen::Index n = m.T.size();
    const Scalar h = m.source.step();
    m.dT.resize(n);
    if (n == 1) {
        m.dT[0] = Scalar(1);
        return;
    }
    m.dT[0] = (m.T[1] - m.T[0]) / h;
    m.dT[n - 1] = (m.T[n - 1] - m.T[n - 2]) / h;
    for (Eigen::Index i = 1; i + 1 < n; ++i) m.dT[i] = (m.T[i + 1] - m.T[i - 1]) / (Scalar(2) * h);
}

// Gradient of a (separably) convex potential: a diagonal map acting
// per axis, monotone along each.
template <typename Scalar>
struct MonotoneMap {
    std::vector<AxisMap<Scalar>> axes;

    int dimension() const { return static_cast<int>(axes.size()); }

    Vec<Scalar> apply(const Vec<Scalar>& x) const {
        Vec<Scalar> y(x.size());
        for (int a = 0; a < dimension(); ++a) y[a] = axes[size_t(a)].apply(x[a]);
        return y;
    }

    Scalar jacobian_det(const Vec<Scalar>& x) const {
        Scalar det = 1;
        for (int a = 0; a < dimension(); ++a) det *= axes[size_t(a)].derivative(x[a]);
        return det;
    }

    Grid<Scalar> source_grid() const {
        Grid<Scalar> g;
        for (const auto& a : axes) g.axes.push_back(a.source);
        return g;
    }

    Grid<Scalar> target_grid() const {
        Grid<Scalar> g;
        for (const auto& a : axes) g.axes.push_back(a.target);
        return g;
    }
};

namespace detail {

// Normalized cumulative function of a cell-constant density at cell edges.
template <typename Scalar>
Vec<Scalar> edge_cdf(const GridAxis<Scalar>& axis, const Vec<Scalar>& density) {
    Vec<Scalar> F(axis.n + 1);
    F[0] = Scalar(0);
    const Scalar h = axis.step();
    for (Eigen::Index i = 0; i < axis.n; ++i) F[i + 1] = F[i] + density[i] * h;
    return F;
}

// Piecewise-linear inverse of an edge CDF; ties resolve to the left edge.
template <typename Scalar>
Scalar invert_cdf(const GridAxis<Scalar>& axis, const Vec<Scalar>& F, Scalar p) {
    const Eigen::Index n = axis.n;
    if (p <= F[0]) return axis.lo;
    if (p >= F[n]) return axis.hi;
    Eigen::Index lo = 0, hi = n;
    while (hi - lo > 1) {
        const Eigen::Index mid = (lo + hi) / 2;
        if (F[mid] <= p)
            lo = mid;
        else
            hi = mid;
    }
    const Scalar span = F[lo + 1] - F[lo];
    const Scalar lam = span > Scalar(0) ? (p - F[lo]) / span : Scalar(0);
    return axis.lo + (Scalar(lo) + lam) * axis.step();
}

template <typename Scalar>
AxisMap<Scalar> rearrangement_1d(const GridAxis<Scalar>& ax, const Vec<Scalar>& kx, const GridAxis<Scalar>& ay,
                                 const Vec<Scalar>& ky) {
    if (kx.size() != ax.n || ky.size() != ay.n) throw GridMismatch("solve_1d: marginal sizes do not match axes");
    if ((kx.array() <= Scalar(0)).any() || (ky.array() <= Scalar(0)).any())
        throw InvalidDensity("solve_1d: marginals must be bounded away from zero");

    Vec<Scalar> F = edge_cdf(ax, kx);
    Vec<Scalar> G = edge_cdf(ay, ky);
    const Scalar mass_x = F[ax.n];
    const Scalar mass_y = G[ay.n];
    if (std::abs(mass_x - mass_y) > Scalar(1e-10) * std::max(Scalar(1), std::abs(mass_x)))
        throw MassMismatch("solve_1d: marginal masses differ beyond tolerance");
    F /= mass_x;
    G /= mass_y;

    AxisMap<Scalar> m;
    m.source = ax;
    m.target = ay;
    m.T.resize(ax.n);
    const Scalar h = ax.step();
    for (Eigen::Index i = 0; i < ax.n; ++i) {
        const Scalar p = F[i] + Scalar(0.5) * kx[i] * h / mass_x;
        m.T[i] = invert_cdf(ay, G, p);
    }
    finite_difference_derivative(m);
    return m;
}

} // namespace detail

// Monotone rearrangement T = G^{-1} o F between 1-D marginals of equal mass.
template <typename Scalar>
MonotoneMap<Scalar> solve_1d(const GridAxis<Scalar>& grid_x, const Vec<Scalar>& kx, const GridAxis<Scalar>& grid_y,
                             const Vec<Scalar>& ky) {
    MonotoneMap<Scalar> map;
    map.axes.push_back(detail::rearrangement_1d(grid_x, kx, grid_y, ky));
    return map;
}

// Tensor-product map for densities declared separable: per-axis factors of
// the source and target marginals.
template <typename Scalar>
MonotoneMap<Scalar> solve_tensor(const std::vector<GridAxis<Scalar>>& axes_x,
                                 const std::vector<Vec<Scalar>>& factors_x,
                                 const std::vector<GridAxis<Scalar>>& axes_y,
                                 const std::vector<Vec<Scalar>>& factors_y) {
    if (axes_x.size() != factors_x.size() || axes_y.size() != factors_y.size() || axes_x.size() != axes_y.size())
        throw Unsupported("solve_tensor: inconsistent per-axis factorization");
    if (axes_x.empty()) throw Unsupported("solve_tensor: empty factorization");
    MonotoneMap<Scalar> map;
    for (size_t a = 0; a < axes_x.size(); ++a) {
        // per-axis masses need not match globally; rearrangement normalizes
        Vec<Scalar> fx = factors_x[a];
        Vec<Scalar> fy = factors_y[a];
        const Scalar mx = axes_x[a].step() * fx.sum();
        const Scalar my = axes_y[a].step() * fy.sum();
        if (!(mx > Scalar(0)) || !(my > Scalar(0))) throw InvalidDensity("solve_tensor: degenerate factor");
        fy *= mx / my; // align factor masses; the diagonal map is invariant under this scaling
        map.axes.push_back(detail::rearrangement_1d(axes_x[a], fx, axes_y[a], fy));
    }
    return map;
}

// Plug point for general d >= 2 solvers. Implementations exchange data in
// the map JSON format ({grid, T_values, det_values}); the bundled solvers
// cover the 1-D and tensor-product cases.
template <typename Scalar>
struct ExternalMaSolver {
    virtual ~ExternalMaSolver() = default;
    virtual MonotoneMap<Scalar> solve(const Grid<Scalar>& grid_x, const Vec<Scalar>& kx, const Grid<Scalar>& grid_y,
                                      const Vec<Scalar>& ky) = 0;
};

template <typename Scalar>
struct MaResidualReport {
    Scalar sup{0};
    Scalar l1{0};
    Scalar grid_step{0};
};

namespace detail {

// Multilinear interpolation of a grid function, clamped at the boundary.
template <typename Scalar>
Scalar interp_grid(const Grid<Scalar>& g, const Vec<Scalar>& values, const Vec<Scalar>& x) {
    const int d = g.dimension();
    const size_t dim = static_cast<size_t>(d);
    std::vector<Eigen::Index> base(dim);
    std::vector<Scalar> lam(dim);
    for (int a = 0; a < d; ++a) {
        const auto& ax = g.axes[size_t(a)];
        if (ax.n == 1) {
            base[size_t(a)] = 0;
            lam[size_t(a)] = Scalar(0);
            continue;
        }
        Scalar pos = (x[a] - ax.center(0)) / ax.step();
        Eigen::Index i = Eigen::Index(std::floor(pos));
        i = std::clamp<Eigen::Index>(i, 0, ax.n - 2);
        base[size_t(a)] = i;
        lam[size_t(a)] = std::clamp<Scalar>(pos - Scalar(i), Scalar(0), Scalar(1));
    }
    Scalar acc = 0;
    const int corners = 1 << d;
    for (int cnr = 0; cnr < corners; ++cnr) {
        Scalar weight = 1;
        Eigen::Index flat = 0;
        for (int a = 0; a < d; ++a) {
            const bool up = (cnr >> a) & 1;
            weight *= up ? lam[size_t(a)] : (Scalar(1) - lam[size_t(a)]);
            const Eigen::Index idx = base[size_t(a)] + (up ? 1 : 0);
            flat = flat * g.axes[size_t(a)].n + std::min(idx, g.axes[size_t(a)].n - 1);
        }
        acc += weight * values[flat];
    }
    return acc;
}

} // namespace detail

// Discrete Monge-Ampere residual |k_y(T(x)) det(DT(x)) - k_x(x)| with
// finite-difference Jacobians, over interior cells.
template <typename Scalar>
MaResidualReport<Scalar> ma_residual(const MonotoneMap<Scalar>& map, const Grid<Scalar>& grid_x,
                                     const Vec<Scalar>& kx, const Grid<Scalar>& grid_y, const Vec<Scalar>& ky) {
    if (grid_x.dimension() != map.dimension()) throw GridMismatch("ma_residual: map/grid dimension mismatch");
    MaResidualReport<Scalar> rep;
    rep.grid_step = std::pow(grid_x.cell_volume(), Scalar(1) / Scalar(grid_x.dimension()));
    const Eigen::Index N = grid_x.size();
    Scalar l1 = 0;
    Eigen::Index counted = 0;
    for (Eigen::Index flat = 0; flat < N; ++flat) {
        // interior test: skip cells touching the boundary along any axis
        bool interior = true;
        Eigen::Index rem = flat;
        for (int a = map.dimension() - 1; a >= 0; --a) {
            const Eigen::Index n = grid_x.axes[size_t(a)].n;
            const Eigen::Index idx = rem % n;
            rem /= n;
            if (idx == 0 || idx == n - 1) interior = false;
        }
        if (!interior && grid_x.axes[0].n > 2) continue;
        const Vec<Scalar> x = grid_x.center(flat);
        const Vec<Scalar> Tx = map.apply(x);
        const Scalar det = map.jacobian_det(x);
        const Scalar pulled = detail::interp_grid(grid_y, ky, Tx) * det;
        const Scalar r = std::abs(pulled - kx[flat]);
        rep.sup = std::max(rep.sup, r);
        l1 += r;
        ++counted;
    }
    rep.l1 = l1 * grid_x.cell_volume();
    (void)counted;
    return rep;
}

} // namespace uot
