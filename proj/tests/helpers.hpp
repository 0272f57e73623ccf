#pragma once

#include <functional>
#include <random>

#include "uot/types.hpp"

namespace uot::testing {

inline Grid<double> unit_grid(Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    return Grid<double>(lo, hi, n);
}

inline GridDensity<double> constant_density(const Grid<double>& g, double value) {
    return GridDensity<double>(g, Vec<double>::Constant(g.size(), value), value);
}

inline GridDensity<double> density_from(const Grid<double>& g, const std::function<double(double)>& fn,
                                        double c_lower) {
    Vec<double> v(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) v[i] = fn(g.center(i)[0]);
    return GridDensity<double>(g, v, c_lower);
}

// f = g = 1 on [0,1], C = 0. Analytic optimum: duals 1/3, coupling 2/3,
// primal 1/3.
inline ProblemSpec<double> uniform_spec(Eigen::Index n, double delta = 0.01) {
    ProblemSpec<double> spec;
    const auto g = unit_grid(n);
    spec.f = constant_density(g, 1.0);
    spec.g = constant_density(g, 1.0);
    spec.cost = CostGrid<double>::zero(g, g);
    spec.delta = delta;
    return spec;
}

// f = 1, g = 2 on [0,1], C = 0. Analytic optimum: coupling 4/5, duals
// (1/5, 3/5), primal 7/10.
inline ProblemSpec<double> asymmetric_spec(Eigen::Index n, double delta = 0.01) {
    ProblemSpec<double> spec;
    const auto g = unit_grid(n);
    spec.f = constant_density(g, 1.0);
    spec.g = constant_density(g, 2.0);
    spec.cost = CostGrid<double>::zero(g, g);
    spec.delta = delta;
    return spec;
}

// f = g = 1 on [0,1] with C = scale * |x-y|^2; the floor k = delta binds in
// the far corners once scale is large enough.
inline ProblemSpec<double> quadratic_cost_spec(Eigen::Index n, double delta = 0.01, double scale = 8.0) {
    ProblemSpec<double> spec;
    const auto g = unit_grid(n);
    spec.f = constant_density(g, 1.0);
    spec.g = constant_density(g, 1.0);
    spec.cost = CostGrid<double>::squared_distance(g, g, scale);
    spec.delta = delta;
    return spec;
}

inline DualPotentials<double> make_duals(const ProblemSpec<double>& spec, Vec<double> k1, Vec<double> k2) {
    DualPotentials<double> d;
    d.grid_x = spec.f.grid;
    d.grid_y = spec.g.grid;
    d.k1 = std::move(k1);
    d.k2 = std::move(k2);
    return d;
}

inline Vec<double> random_vec(Eigen::Index n, std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
    Vec<double> v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = double(rng()) / double(std::mt19937::max());
        v[i] = lo + (hi - lo) * u;
    }
    return v;
}

} // namespace uot::testing
