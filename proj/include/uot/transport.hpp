#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "uot/monge_ampere.hpp"

namespace uot {

// Everything needed to evaluate (T_t, xi_t, zeta_t): the optimal map, the
// smoothed dual potentials and the time horizon.
template <typename Scalar>
struct DynamicsFields {
    Scalar horizon{1};
    MonotoneMap<Scalar> map; // gradient of the convex potential
    Grid<Scalar> grid_f;
    Grid<Scalar> grid_g;
    Vec<Scalar> k1_tilde; // on grid_f
    Vec<Scalar> k2_tilde; // on grid_g
};

// McCann interpolation T_t(x) = ((T-t)/T) x + (t/T) grad_phi(x) along one axis.
template <typename Scalar>
Scalar interp_axis_forward(const AxisMap<Scalar>& ax, Scalar t, Scalar T, Scalar x) {
    return (Scalar(1) - t / T) * x + (t / T) * ax.apply(x);
}

template <typename Scalar>
Vec<Scalar> interp_forward(const MonotoneMap<Scalar>& map, Scalar t, Scalar T, const Vec<Scalar>& x) {
    Vec<Scalar> y(x.size());
    for (int a = 0; a < map.dimension(); ++a) y[a] = interp_axis_forward(map.axes[size_t(a)], t, T, x[a]);
    return y;
}

// Inverse of the interpolated map by per-axis bisection on the support box.
template <typename Scalar>
Vec<Scalar> interp_inverse(const MonotoneMap<Scalar>& map, Scalar t, Scalar T, const Vec<Scalar>& x) {
    if (t < Scalar(0) || t > T) throw InvalidParameter("interp_map: t outside [0, T]");
    Vec<Scalar> y(x.size());
    for (int a = 0; a < map.dimension(); ++a) {
        const auto& ax = map.axes[size_t(a)];
        Scalar lo = ax.source.lo;
        Scalar hi = ax.source.hi;
        const Scalar span = hi - lo;
        const Scalar slack = Scalar(1e-9) * std::max(Scalar(1), span);
        const Scalar flo = interp_axis_forward(ax, t, T, lo);
        const Scalar fhi = interp_axis_forward(ax, t, T, hi);
        if (x[a] < flo - slack || x[a] > fhi + slack)
            throw OutOfRange("interp_map: query outside the image of the support");
        Scalar target = std::clamp(x[a], flo, fhi);
        for (int it = 0; it < 80; ++it) {
            const Scalar mid = Scalar(0.5) * (lo + hi);
            if (interp_axis_forward(ax, t, T, mid) <= target)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= Scalar(1e-12) * std::max(Scalar(1), span)) break;
        }
        y[a] = Scalar(0.5) * (lo + hi);
    }
    return y;
}

// xi_t(x) = (grad_phi(y) - y)/T with y = T_t^{-1}(x).
template <typename Scalar>
Vec<Scalar> velocity(const DynamicsFields<Scalar>& fields, const Vec<Scalar>& x, Scalar t) {
    const Vec<Scalar> y = interp_inverse(fields.map, t, fields.horizon, x);
    return (fields.map.apply(y) - y) / fields.horizon;
}

namespace detail {

template <typename Scalar>
Scalar growth_from_label(const DynamicsFields<Scalar>& fields, const Vec<Scalar>& label, Scalar t) {
    const Scalar tau = t / fields.horizon;
    const Scalar a = interp_grid(fields.grid_f, fields.k1_tilde, label);
    const Scalar b = interp_grid(fields.grid_g, fields.k2_tilde, fields.map.apply(label));
    return (-a / (Scalar(1) - tau * a) + b / (Scalar(1) - tau * b)) / fields.horizon;
}

// e^{int_0^t zeta} along the characteristic with Lagrangian label x.
template <typename Scalar>
Scalar mass_factor_from_label(const DynamicsFields<Scalar>& fields, const Vec<Scalar>& label, Scalar t) {
    const Scalar tau = t / fields.horizon;
    const Scalar a = interp_grid(fields.grid_f, fields.k1_tilde, label);
    const Scalar b = interp_grid(fields.grid_g, fields.k2_tilde, fields.map.apply(label));
    return (Scalar(1) - tau * a) / (Scalar(1) - tau * b);
}

} // namespace detail

// zeta_t(x), with x in the image of the support at time t.
template <typename Scalar>
Scalar growth(const DynamicsFields<Scalar>& fields, const Vec<Scalar>& x, Scalar t) {
    return detail::growth_from_label(fields, interp_inverse(fields.map, t, fields.horizon, x), t);
}

// Closed form (1 - (t/T) k1~(y)) / (1 - (t/T) k2~(grad_phi(y))), y = T_t^{-1}(x).
template <typename Scalar>
Scalar mass_factor(const DynamicsFields<Scalar>& fields, const Vec<Scalar>& x, Scalar t) {
    return detail::mass_factor_from_label(fields, interp_inverse(fields.map, t, fields.horizon, x), t);
}

// fbar = kbar_x / (1 - k1~), gbar = kbar_y / (1 - k2~).
template <typename Scalar>
std::pair<GridDensity<Scalar>, GridDensity<Scalar>> build_endpoint_densities(const Coupling<Scalar>& coupling,
                                                                             const DualPotentials<Scalar>& duals) {
    const Vec<Scalar>& k1t = duals.smoothed1();
    const Vec<Scalar>& k2t = duals.smoothed2();
    if (k1t.size() != coupling.kx.size() || k2t.size() != coupling.ky.size())
        throw GridMismatch("build_endpoint_densities: dual grids do not match coupling marginals");
    const Vec<Scalar> den1 = (Scalar(1) - k1t.array()).matrix();
    const Vec<Scalar> den2 = (Scalar(1) - k2t.array()).matrix();
    if (den1.minCoeff() <= Scalar(0) || den2.minCoeff() <= Scalar(0))
        throw FeasibilityViolation("build_endpoint_densities: 1 - k~ must stay positive");
    Vec<Scalar> fbar = (coupling.kx.array() / den1.array()).matrix();
    Vec<Scalar> gbar = (coupling.ky.array() / den2.array()).matrix();
    GridDensity<Scalar> fd(coupling.grid_x, fbar, fbar.minCoeff());
    GridDensity<Scalar> gd(coupling.grid_y, gbar, gbar.minCoeff());
    return {std::move(fd), std::move(gd)};
}

// Lagrangian evolution of the unbalanced density: per characteristic,
// mu_t(T_t(x)) = fbar(x) e^{int zeta} / det(D T_t(x)).
template <typename Scalar>
struct EvolvedDensity {
    std::vector<Scalar> times;
    Grid<Scalar> source_grid;
    std::vector<Mat<Scalar>> positions;            // per stamp, N x d
    std::vector<std::vector<Vec<Scalar>>> axis_positions; // per stamp, moved per-axis coordinates
    std::vector<Vec<Scalar>> values;               // density at the moved samples
    std::vector<Vec<Scalar>> weights;              // Lagrangian masses fbar * factor * vol
    std::vector<Scalar> masses;
};

template <typename Scalar>
EvolvedDensity<Scalar> evolve(const DynamicsFields<Scalar>& fields, const GridDensity<Scalar>& fbar,
                              const std::vector<Scalar>& times) {
    if (fbar.grid != fields.grid_f) throw GridMismatch("evolve: fbar grid does not match the dynamics");
    EvolvedDensity<Scalar> out;
    out.times = times;
    out.source_grid = fields.grid_f;
    const Eigen::Index N = fields.grid_f.size();
    const int d = fields.grid_f.dimension();
    const Scalar T = fields.horizon;
    const Scalar vol = fields.grid_f.cell_volume();

    for (Scalar t : times) {
        const Scalar tau = t / T;
        Mat<Scalar> pos(N, d);
        Vec<Scalar> val(N), wgt(N);
        std::vector<Vec<Scalar>> axpos;
        for (int a = 0; a < d; ++a) {
            const auto& ax = fields.map.axes[size_t(a)];
            Vec<Scalar> moved(ax.source.n);
            for (Eigen::Index i = 0; i < ax.source.n; ++i)
                moved[i] = interp_axis_forward(ax, t, T, ax.source.center(i));
            axpos.push_back(std::move(moved));
        }
        for (Eigen::Index flat = 0; flat < N; ++flat) {
            const Vec<Scalar> x = fields.grid_f.center(flat);
            Scalar det = 1;
            Eigen::Index rem = flat;
            for (int a = d - 1; a >= 0; --a) {
                const auto& ax = fields.map.axes[size_t(a)];
                const Eigen::Index idx = rem % ax.source.n;
                rem /= ax.source.n;
                pos(flat, a) = axpos[size_t(a)][idx];
                det *= (Scalar(1) - tau) + tau * ax.dT[idx];
            }
            if (!(det > Scalar(1e-12)))
                throw DegenerateMap("evolve: Jacobian determinant vanished along a characteristic");
            const Scalar factor = detail::mass_factor_from_label(fields, x, t);
            val[flat] = fbar.values[flat] * factor / det;
            wgt[flat] = fbar.values[flat] * factor * vol;
        }
        out.positions.push_back(std::move(pos));
        out.axis_positions.push_back(std::move(axpos));
        out.values.push_back(std::move(val));
        out.weights.push_back(std::move(wgt));
        out.masses.push_back(out.weights.back().sum());
    }
    return out;
}

// Resample a 1-D evolved stamp onto a fixed grid by monotone interpolation;
// zero outside the moved support.
template <typename Scalar>
Vec<Scalar> eulerian_resample(const EvolvedDensity<Scalar>& evolved, size_t stamp, const Grid<Scalar>& target) {
    if (evolved.source_grid.dimension() != 1 || target.dimension() != 1)
        throw Unsupported("eulerian_resample: implemented for d = 1");
    const Vec<Scalar>& xs = evolved.axis_positions[stamp][0];
    const Vec<Scalar>& vs = evolved.values[stamp];
    Vec<Scalar> out = Vec<Scalar>::Zero(target.size());
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        const Scalar y = target.center(i)[0];
        if (y < xs[0] || y > xs[xs.size() - 1]) continue;
        Eigen::Index lo = 0, hi = xs.size() - 1;
        while (hi - lo > 1) {
            const Eigen::Index mid = (lo + hi) / 2;
            if (xs[mid] <= y)
                lo = mid;
            else
                hi = mid;
        }
        const Scalar span = xs[hi] - xs[lo];
        const Scalar lam = span > Scalar(0) ? (y - xs[lo]) / span : Scalar(0);
        out[i] = vs[lo] + lam * (vs[hi] - vs[lo]);
    }
    return out;
}

template <typename Scalar>
struct TestFunction {
    std::function<Scalar(const Vec<Scalar>&)> value;
    std::function<Vec<Scalar>(const Vec<Scalar>&)> gradient;
};

// Weak-form residual of d/dt int phi dmu = int xi . grad phi dmu + int phi zeta dmu,
// centered differences in t; one residual per test function.
template <typename Scalar>
std::vector<Scalar> continuity_residual(const EvolvedDensity<Scalar>& evolved, const DynamicsFields<Scalar>& fields,
                                        const std::vector<TestFunction<Scalar>>& tests) {
    if (evolved.times.size() < 3) throw InvalidParameter("continuity_residual: need at least 3 time stamps");
    const Eigen::Index N = evolved.source_grid.size();
    std::vector<Scalar> residuals;
    for (const auto& test : tests) {
        // moments I(s) = int phi dmu_s at all stamps
        std::vector<Scalar> I(evolved.times.size(), Scalar(0));
        for (size_t s = 0; s < evolved.times.size(); ++s) {
            Scalar acc = 0;
            for (Eigen::Index i = 0; i < N; ++i)
                acc += test.value(evolved.positions[s].row(i).transpose()) * evolved.weights[s][i];
            I[s] = acc;
        }
        Scalar worst = 0;
        for (size_t s = 1; s + 1 < evolved.times.size(); ++s) {
            const Scalar dt = evolved.times[s + 1] - evolved.times[s - 1];
            const Scalar dIdt = (I[s + 1] - I[s - 1]) / dt;
            Scalar rhs = 0;
            const Scalar t = evolved.times[s];
            for (Eigen::Index i = 0; i < N; ++i) {
                const Vec<Scalar> label = evolved.source_grid.center(i);
                const Vec<Scalar> p = evolved.positions[s].row(i).transpose();
                const Vec<Scalar> xi = (fields.map.apply(label) - label) / fields.horizon;
                const Scalar zeta = detail::growth_from_label(fields, label, t);
                rhs += (xi.dot(test.gradient(p)) + zeta * test.value(p)) * evolved.weights[s][i];
            }
            worst = std::max(worst, std::abs(dIdt - rhs));
        }
        residuals.push_back(worst);
    }
    return residuals;
}

} // namespace uot
