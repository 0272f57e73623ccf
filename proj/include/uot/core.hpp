#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "uot/types.hpp"

namespace uot {

// Pearson divergence F(mu|nu) = int (dmu/dnu - 1)^2 dnu by midpoint quadrature.
template <typename Scalar>
Scalar pearson_divergence(const Vec<Scalar>& mu, const GridDensity<Scalar>& nu) {
    if (mu.size() != nu.values.size()) throw GridMismatch("pearson_divergence: grid mismatch");
    if ((nu.values.array() <= Scalar(0)).any())
        throw InvalidDensity("pearson_divergence: reference density has a nonpositive cell");
    const auto ratio = mu.array() / nu.values.array() - Scalar(1);
    return integrate(nu.grid, (ratio.square() * nu.values.array()).matrix());
}

// Row/column quadrature marginals of a coupling; total masses agree exactly.
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> marginals(const Coupling<Scalar>& k) {
    Vec<Scalar> kx = k.values.rowwise().sum() * k.grid_y.cell_volume();
    Vec<Scalar> ky = k.values.colwise().sum().transpose() * k.grid_x.cell_volume();
    return {std::move(kx), std::move(ky)};
}

// int C k + 1/2 ||k||_L2^2 + 1/2 F(k_x|f) + 1/2 F(k_y|g)
template <typename Scalar>
Scalar primal_objective(const Coupling<Scalar>& k, const ProblemSpec<Scalar>& spec) {
    const Scalar viol = k.feasibility_violation();
    if (viol > Scalar(0))
        throw FeasibilityViolation("primal_objective: coupling violates k >= delta by " + std::to_string(double(viol)));
    auto [kx, ky] = marginals(k);
    const Scalar cost_term = integrate_product(k.grid_x, k.grid_y, (spec.cost.values.array() * k.values.array()).matrix());
    const Scalar reg_term = Scalar(0.5) * norm_l2_sq_product(k.grid_x, k.grid_y, k.values);
    const Scalar fx = Scalar(0.5) * pearson_divergence(kx, spec.f);
    const Scalar fy = Scalar(0.5) * pearson_divergence(ky, spec.g);
    return cost_term + reg_term + fx + fy;
}

// (1/2 F)*_theta(u*|v) = 1/2 int v [ max{theta/v, u*+1} (2u*+2 - max{theta/v, u*+1}) - 1 ] dx
template <typename Scalar>
Scalar conjugate_F(const Vec<Scalar>& u_star, const GridDensity<Scalar>& v, Scalar theta) {
    if (!(theta > Scalar(0))) throw InvalidParameter("conjugate_F: theta must be positive");
    if (u_star.size() != v.values.size()) throw GridMismatch("conjugate_F: grid mismatch");
    const auto m = (theta / v.values.array()).max(u_star.array() + Scalar(1));
    const auto integrand = v.values.array() * (m * (Scalar(2) * u_star.array() + Scalar(2) - m) - Scalar(1));
    return Scalar(0.5) * integrate(v.grid, integrand.matrix());
}

// Cbar*_delta(k*) = 1/2 int max{delta, k*-C} (2(k*-C) - max{delta, k*-C}) dxdy
template <typename Scalar>
Scalar conjugate_Cbar(const Mat<Scalar>& kstar_sum, const ProblemSpec<Scalar>& spec) {
    if (kstar_sum.rows() != spec.cost.values.rows() || kstar_sum.cols() != spec.cost.values.cols())
        throw GridMismatch("conjugate_Cbar: grid mismatch");
    const auto a = kstar_sum.array() - spec.cost.values.array();
    const auto m = a.max(spec.delta);
    const auto integrand = m * (Scalar(2) * a - m);
    return Scalar(0.5) * integrate_product(spec.f.grid, spec.g.grid, integrand.matrix());
}

template <typename Scalar>
Mat<Scalar> dual_sum(const DualPotentials<Scalar>& duals) {
    return duals.k1.rowwise().replicate(duals.k2.size()) + duals.k2.transpose().colwise().replicate(duals.k1.size());
}

// Dual objective of Eq. (mindual); its optimum equals -primal.
template <typename Scalar>
Scalar dual_objective(const DualPotentials<Scalar>& duals, const ProblemSpec<Scalar>& spec) {
    const Scalar theta_f = spec.delta * spec.volume_g();
    const Scalar theta_g = spec.delta * spec.volume_f();
    return conjugate_Cbar<Scalar>(dual_sum(duals), spec) + conjugate_F<Scalar>(-duals.k1, spec.f, theta_f) +
           conjugate_F<Scalar>(-duals.k2, spec.g, theta_g);
}

// KKT primal recovery k = max{delta, k*_1 + k*_2 - C}.
template <typename Scalar>
Coupling<Scalar> kkt_recover_coupling(const DualPotentials<Scalar>& duals, const ProblemSpec<Scalar>& spec) {
    Mat<Scalar> k = (dual_sum(duals).array() - spec.cost.values.array()).max(spec.delta).matrix();
    return Coupling<Scalar>(spec.f.grid, spec.g.grid, std::move(k), spec.delta);
}

template <typename Scalar>
struct KktResiduals {
    Scalar coupling;   // ||k - max{delta, k1 + k2 - C}||_inf
    Scalar marginal_x; // ||k_x - f max{delta|Og|/f, 1-k1}||_inf
    Scalar marginal_y; // ||k_y - g max{delta|Of|/g, 1-k2}||_inf
    Scalar duality_gap; // |primal + dual|
    Scalar max_residual() const { return std::max({coupling, marginal_x, marginal_y}); }
};

template <typename Scalar>
KktResiduals<Scalar> kkt_residuals(const Coupling<Scalar>& k, const DualPotentials<Scalar>& duals,
                                   const ProblemSpec<Scalar>& spec) {
    if (k.grid_x != spec.f.grid || k.grid_y != spec.g.grid)
        throw GridMismatch("kkt_residuals: coupling grids do not match spec");
    KktResiduals<Scalar> res;
    const Mat<Scalar> krec = (dual_sum(duals).array() - spec.cost.values.array()).max(spec.delta).matrix();
    res.coupling = (k.values - krec).template lpNorm<Eigen::Infinity>();

    auto [kx, ky] = marginals(k);
    const Scalar theta_f = spec.delta * spec.volume_g();
    const Scalar theta_g = spec.delta * spec.volume_f();
    const Vec<Scalar> mx =
        (spec.f.values.array() * (theta_f / spec.f.values.array()).max(Scalar(1) - duals.k1.array())).matrix();
    const Vec<Scalar> my =
        (spec.g.values.array() * (theta_g / spec.g.values.array()).max(Scalar(1) - duals.k2.array())).matrix();
    res.marginal_x = (kx - mx).template lpNorm<Eigen::Infinity>();
    res.marginal_y = (ky - my).template lpNorm<Eigen::Infinity>();
    res.duality_gap = std::abs(primal_objective(k, spec) + dual_objective(duals, spec));
    return res;
}

// w(u,v) = 1/2 (||u||^2 + ||v||^2)
template <typename Scalar>
Scalar w_functional(const Grid<Scalar>& gx, const Grid<Scalar>& gy, const Vec<Scalar>& u, const Vec<Scalar>& v) {
    return Scalar(0.5) * (norm_l2_sq(gx, u) + norm_l2_sq(gy, v));
}

// G(u,v) = Cbar*-type product term with R = u + v - C, plus the quadratic
// marginal mismatch terms. Its unconstrained minimizer is the dual optimum.
template <typename Scalar>
Scalar G_eval(const Vec<Scalar>& u, const Vec<Scalar>& v, const ProblemSpec<Scalar>& spec) {
    if (u.size() != spec.f.grid.size() || v.size() != spec.g.grid.size())
        throw GridMismatch("G_eval: potential grids do not match spec");
    const auto R = (u.rowwise().replicate(v.size()) + v.transpose().colwise().replicate(u.size())).array() -
                   spec.cost.values.array();
    const auto m = R.max(spec.delta);
    const Scalar t1 = Scalar(0.5) * integrate_product(spec.f.grid, spec.g.grid, (m * (Scalar(2) * R - m)).matrix());
    const Scalar t2 =
        Scalar(0.5) * integrate(spec.f.grid, ((Scalar(1) - u.array()).square() * spec.f.values.array()).matrix());
    const Scalar t3 =
        Scalar(0.5) * integrate(spec.g.grid, ((Scalar(1) - v.array()).square() * spec.g.values.array()).matrix());
    return t1 + t2 + t3;
}

// Frechet derivatives:
//   D1G(u,v)(x) = int max{delta, R} dy + (u - 1) f
//   D2G(u,v)(y) = int max{delta, R} dx + (v - 1) g
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> G_gradients(const Vec<Scalar>& u, const Vec<Scalar>& v,
                                                const ProblemSpec<Scalar>& spec) {
    if (u.size() != spec.f.grid.size() || v.size() != spec.g.grid.size())
        throw GridMismatch("G_gradients: potential grids do not match spec");
    const Mat<Scalar> m = ((u.rowwise().replicate(v.size()) + v.transpose().colwise().replicate(u.size())).array() -
                           spec.cost.values.array())
                              .max(spec.delta)
                              .matrix();
    Vec<Scalar> d1 = m.rowwise().sum() * spec.g.grid.cell_volume() +
                     ((u.array() - Scalar(1)) * spec.f.values.array()).matrix();
    Vec<Scalar> d2 = m.colwise().sum().transpose() * spec.f.grid.cell_volume() +
                     ((v.array() - Scalar(1)) * spec.g.values.array()).matrix();
    return {std::move(d1), std::move(d2)};
}

// G_w = G - (c/4) w; its gradient is alpha-Lipschitz with alpha from Eq. (alpha).
template <typename Scalar>
Scalar Gw_eval(const Vec<Scalar>& u, const Vec<Scalar>& v, const ProblemSpec<Scalar>& spec) {
    return G_eval(u, v, spec) - spec.c() / Scalar(4) * w_functional(spec.f.grid, spec.g.grid, u, v);
}

template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> Gw_gradients(const Vec<Scalar>& u, const Vec<Scalar>& v,
                                                 const ProblemSpec<Scalar>& spec) {
    auto [d1, d2] = G_gradients(u, v, spec);
    d1 -= spec.c() / Scalar(4) * u;
    d2 -= spec.c() / Scalar(4) * v;
    return {std::move(d1), std::move(d2)};
}

} // namespace uot
