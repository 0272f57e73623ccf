#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "uot/grid.hpp"

namespace uot {

// Compactly supported density on a uniform grid, bounded below by the
// witness c_lower on its support.
template <typename Scalar>
struct GridDensity {
    Grid<Scalar> grid;
    Vec<Scalar> values;
    Scalar c_lower{0};

    GridDensity() = default;
    GridDensity(Grid<Scalar> g, Vec<Scalar> v, Scalar c) : grid(std::move(g)), values(std::move(v)), c_lower(c) {
        validate();
    }

    void validate() const {
        require(grid.size() == values.size(), "density values do not match grid size");
        require(grid.volume() > Scalar(0), "density support has zero volume");
        if (!(c_lower > Scalar(0))) throw InvalidDensity("c_lower must be positive");
        if (!values.allFinite()) throw InvalidDensity("density has non-finite values");
        if ((values.array() < c_lower).any())
            throw InvalidDensity("density falls below its lower-bound witness c_lower");
    }

    Scalar mass() const { return integrate(grid, values); }
    Scalar sup() const { return values.maxCoeff(); }
};

// Cost samples C(x_i, y_j) >= 0 on the product grid, with an optional
// analytic-form tag ("zero", "sqdist", "grid").
template <typename Scalar>
struct CostGrid {
    Grid<Scalar> grid_x;
    Grid<Scalar> grid_y;
    Mat<Scalar> values; // Nf x Ng
    std::string form_tag{"grid"};
    Scalar form_scale{1};

    static CostGrid zero(const Grid<Scalar>& gx, const Grid<Scalar>& gy) {
        CostGrid c;
        c.grid_x = gx;
        c.grid_y = gy;
        c.values = Mat<Scalar>::Zero(gx.size(), gy.size());
        c.form_tag = "zero";
        c.form_scale = 0;
        return c;
    }

    // scale * |x - y|^2
    static CostGrid squared_distance(const Grid<Scalar>& gx, const Grid<Scalar>& gy, Scalar scale = Scalar(1)) {
        CostGrid c;
        c.grid_x = gx;
        c.grid_y = gy;
        c.values.resize(gx.size(), gy.size());
        for (Eigen::Index i = 0; i < gx.size(); ++i) {
            const Vec<Scalar> xi = gx.center(i);
            for (Eigen::Index j = 0; j < gy.size(); ++j) {
                c.values(i, j) = scale * (xi - gy.center(j)).squaredNorm();
            }
        }
        c.form_tag = "sqdist";
        c.form_scale = scale;
        return c;
    }

    void validate() const {
        require(values.rows() == grid_x.size() && values.cols() == grid_y.size(),
                "cost values do not match product grid");
        if (!values.allFinite() || (values.array() < Scalar(0)).any())
            throw InvalidParameter("cost must be finite and nonnegative");
    }

    // Discrete Hoelder-type modulus: max neighbor difference / h^gamma.
    Scalar discrete_modulus(Scalar gamma = Scalar(1)) const {
        Scalar worst = 0;
        const Scalar hx = grid_x.cell_volume();
        const Scalar hy = grid_y.cell_volume();
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            for (Eigen::Index j = 0; j + 1 < values.cols(); ++j)
                worst = std::max(worst, std::abs(values(i, j + 1) - values(i, j)) / std::pow(hy, gamma));
        for (Eigen::Index i = 0; i + 1 < values.rows(); ++i)
            for (Eigen::Index j = 0; j < values.cols(); ++j)
                worst = std::max(worst, std::abs(values(i + 1, j) - values(i, j)) / std::pow(hx, gamma));
        return worst;
    }
};

// Joint density k >= delta on the product grid, with quadrature-consistent
// cached marginals.
template <typename Scalar>
struct Coupling {
    Grid<Scalar> grid_x;
    Grid<Scalar> grid_y;
    Mat<Scalar> values; // Nf x Ng
    Scalar delta{0};
    Vec<Scalar> kx; // row quadrature, on grid_x
    Vec<Scalar> ky; // column quadrature, on grid_y

    Coupling() = default;
    Coupling(Grid<Scalar> gx, Grid<Scalar> gy, Mat<Scalar> v, Scalar d)
        : grid_x(std::move(gx)), grid_y(std::move(gy)), values(std::move(v)), delta(d) {
        require(values.rows() == grid_x.size() && values.cols() == grid_y.size(),
                "coupling values do not match product grid");
        refresh_marginals();
    }

    void refresh_marginals() {
        kx = values.rowwise().sum() * grid_y.cell_volume();
        ky = values.colwise().sum().transpose() * grid_x.cell_volume();
    }

    Scalar min_value() const { return values.minCoeff(); }
    Scalar mass() const { return integrate_product(grid_x, grid_y, values); }
    Scalar feasibility_violation() const { return std::max(Scalar(0), delta - values.minCoeff()); }
};

// Dual pair (k*_1, k*_2) plus optionally their mollified versions.
template <typename Scalar>
struct DualPotentials {
    Grid<Scalar> grid_x;
    Grid<Scalar> grid_y;
    Vec<Scalar> k1;
    Vec<Scalar> k2;
    std::optional<Vec<Scalar>> k1_tilde;
    std::optional<Vec<Scalar>> k2_tilde;
    Scalar varsigma0{0}; // mollifier width used for the tilde pair

    const Vec<Scalar>& smoothed1() const { return k1_tilde ? *k1_tilde : k1; }
    const Vec<Scalar>& smoothed2() const { return k2_tilde ? *k2_tilde : k2; }
};

// Full problem instance: endpoint densities, cost and the floor delta.
template <typename Scalar>
struct ProblemSpec {
    GridDensity<Scalar> f;
    GridDensity<Scalar> g;
    CostGrid<Scalar> cost;
    Scalar delta{0};
    std::string quadrature{"midpoint"};

    Scalar c() const { return std::min(f.c_lower, g.c_lower); }
    Scalar sup_bound() const { return std::max(f.sup(), g.sup()); } // E
    Scalar volume_f() const { return f.grid.volume(); }
    Scalar volume_g() const { return g.grid.volume(); }

    void validate() const {
        f.validate();
        g.validate();
        cost.validate();
        require(quadrature == "midpoint", "only the midpoint quadrature rule is supported");
        if (cost.grid_x != f.grid || cost.grid_y != g.grid)
            throw GridMismatch("cost grid does not coincide with density grids");
        if (!(delta > Scalar(0))) throw InvalidDelta("delta must be positive");
        if (delta * std::max(volume_f(), volume_g()) > c() * (Scalar(1) + Scalar(1e-12)))
            throw InvalidDelta("delta * max{|Omega_f|,|Omega_g|} exceeds the lower-bound witness c");
    }
};

} // namespace uot
