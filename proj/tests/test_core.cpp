#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "uot/core.hpp"

using namespace uot;
using namespace uot::testing;

TEST_CASE("pearson divergence: identical arguments vanish") {
    auto spec = uniform_spec(32);
    CHECK(pearson_divergence<double>(spec.f.values, spec.f) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("pearson divergence: analytic constants") {
    auto spec = uniform_spec(32);
    Vec<double> mu = Vec<double>::Constant(32, 2.0 / 3.0);
    CHECK(pearson_divergence<double>(mu, spec.f) == doctest::Approx(1.0 / 9.0).epsilon(1e-13));
    mu.setConstant(2.0);
    CHECK(pearson_divergence<double>(mu, spec.f) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("pearson divergence: errors and convexity") {
    auto spec = uniform_spec(8);
    Vec<double> bad = Vec<double>::Ones(9);
    CHECK_THROWS_AS(pearson_divergence<double>(bad, spec.f), GridMismatch);

    // strict convexity in mu and zero iff equal
    std::mt19937 rng(7);
    Vec<double> a = random_vec(8, rng, 0.1, 2.0);
    Vec<double> b = random_vec(8, rng, 0.1, 2.0);
    const double mid = pearson_divergence<double>(0.5 * (a + b), spec.f);
    const double avg = 0.5 * (pearson_divergence<double>(a, spec.f) + pearson_divergence<double>(b, spec.f));
    CHECK(mid < avg);
    CHECK(pearson_divergence<double>(spec.f.values, spec.f) == 0.0);
}

TEST_CASE("marginals: constant coupling and separable products") {
    auto spec = uniform_spec(16);
    const double delta = 0.25;
    Coupling<double> k(spec.f.grid, spec.g.grid, Mat<double>::Constant(16, 16, delta), delta);
    auto [kx, ky] = marginals(k);
    CHECK((kx.array() - delta).abs().maxCoeff() < 1e-15);
    CHECK((ky.array() - delta).abs().maxCoeff() < 1e-15);

    // k(x,y) = x + y  ->  k_x(x) = x + 1/2 up to midpoint-rule exactness (linear: exact)
    Mat<double> v(16, 16);
    for (Eigen::Index i = 0; i < 16; ++i)
        for (Eigen::Index j = 0; j < 16; ++j)
            v(i, j) = spec.f.grid.center(i)[0] + spec.g.grid.center(j)[0];
    Coupling<double> k2(spec.f.grid, spec.g.grid, v, 0.0);
    auto [kx2, ky2] = marginals(k2);
    for (Eigen::Index i = 0; i < 16; ++i)
        CHECK(kx2[i] == doctest::Approx(spec.f.grid.center(i)[0] + 0.5).epsilon(1e-13));

    // separable k = a(x) b(y) -> k_x = a * integral(b)
    std::mt19937 rng(3);
    Vec<double> a = random_vec(16, rng, 0.2, 1.0);
    Vec<double> b = random_vec(16, rng, 0.2, 1.0);
    Coupling<double> k3(spec.f.grid, spec.g.grid, a * b.transpose(), 0.0);
    auto [kx3, ky3] = marginals(k3);
    const double ib = integrate(spec.g.grid, b);
    CHECK((kx3 - a * ib).lpNorm<Eigen::Infinity>() < 1e-14);

    // total masses agree exactly
    CHECK(integrate(spec.f.grid, kx3) == doctest::Approx(integrate(spec.g.grid, ky3)).epsilon(1e-14));
}

TEST_CASE("primal objective: uniform-case analytic values") {
    auto spec = uniform_spec(64);
    Coupling<double> k(spec.f.grid, spec.g.grid, Mat<double>::Constant(64, 64, 2.0 / 3.0), spec.delta);
    CHECK(primal_objective(k, spec) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Coupling<double> k1(spec.f.grid, spec.g.grid, Mat<double>::Constant(64, 64, 1.0), spec.delta);
    CHECK(primal_objective(k1, spec) == doctest::Approx(0.5).epsilon(1e-12));

    // k = delta: 1/2 delta^2 + (delta - 1)^2 -> 1 as delta -> 0
    for (double d : {1e-2, 1e-3, 1e-4}) {
        auto s = uniform_spec(64, d);
        Coupling<double> kd(s.f.grid, s.g.grid, Mat<double>::Constant(64, 64, d), d);
        CHECK(primal_objective(kd, s) == doctest::Approx(0.5 * d * d + (d - 1) * (d - 1)).epsilon(1e-12));
    }
}

TEST_CASE("primal objective: infeasible coupling throws") {
    auto spec = uniform_spec(8);
    Coupling<double> k(spec.f.grid, spec.g.grid, Mat<double>::Constant(8, 8, 0.001), spec.delta);
    CHECK_THROWS_AS(primal_objective(k, spec), FeasibilityViolation);
}

TEST_CASE("conjugate_F: analytic evaluations") {
    auto spec = uniform_spec(32);
    Vec<double> u = Vec<double>::Zero(32);
    CHECK(conjugate_F<double>(u, spec.f, 0.5) == doctest::Approx(0.0).epsilon(1e-14));

    u.setConstant(-1.0 / 3.0);
    CHECK(conjugate_F<double>(u, spec.f, 1e-9) == doctest::Approx(-5.0 / 18.0).epsilon(1e-12));

    u.setConstant(-1.0);
    CHECK(conjugate_F<double>(u, spec.f, 1.0) == doctest::Approx(-1.0).epsilon(1e-13));

    CHECK_THROWS_AS(conjugate_F<double>(u, spec.f, 0.0), InvalidParameter);
}

TEST_CASE("conjugate_Cbar: analytic evaluations") {
    auto spec = uniform_spec(32, 1e-6);
    Mat<double> ks = Mat<double>::Zero(32, 32);
    CHECK(conjugate_Cbar(ks, spec) == doctest::Approx(0.0).epsilon(1e-9));

    ks.setConstant(2.0 / 3.0);
    auto spec2 = uniform_spec(32, 0.01);
    CHECK(conjugate_Cbar(ks, spec2) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));

    // k* - C = -1, delta = 0.1 -> 1/2 * 0.1 * (-2 - 0.1) = -0.105 per unit volume
    ks.setConstant(-1.0);
    auto spec3 = uniform_spec(32, 0.1);
    CHECK(conjugate_Cbar(ks, spec3) == doctest::Approx(-0.105).epsilon(1e-12));
}

TEST_CASE("dual objective: uniform optimum and zero duals") {
    auto spec = uniform_spec(64);
    auto duals = make_duals(spec, Vec<double>::Constant(64, 1.0 / 3.0), Vec<double>::Constant(64, 1.0 / 3.0));
    CHECK(dual_objective(duals, spec) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));

    // dual(u, v) = G(u, v) - (mass_f + mass_g)/2 on the feasible set
    auto zero = make_duals(spec, Vec<double>::Zero(64), Vec<double>::Zero(64));
    const double lhs = dual_objective(zero, spec);
    const double rhs = G_eval(zero.k1, zero.k2, spec) - 0.5 * (spec.f.mass() + spec.g.mass());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("kkt_recover_coupling: clamp formula") {
    auto spec = uniform_spec(16);
    auto duals = make_duals(spec, Vec<double>::Constant(16, 1.0 / 3.0), Vec<double>::Constant(16, 1.0 / 3.0));
    auto k = kkt_recover_coupling(duals, spec);
    CHECK((k.values.array() - 2.0 / 3.0).abs().maxCoeff() < 1e-15);

    auto low = make_duals(spec, Vec<double>::Constant(16, -3.0), Vec<double>::Constant(16, -3.0));
    auto kd = kkt_recover_coupling(low, spec);
    CHECK((kd.values.array() - spec.delta).abs().maxCoeff() == 0.0);

    auto spec_c = quadratic_cost_spec(16, 0.01, 1.0); // C = |x-y|^2
    auto ones = make_duals(spec_c, Vec<double>::Ones(16), Vec<double>::Ones(16));
    auto kc = kkt_recover_coupling(ones, spec_c);
    for (Eigen::Index i = 0; i < 16; i += 5)
        for (Eigen::Index j = 0; j < 16; j += 3) {
            const double d2 = std::pow(spec_c.f.grid.center(i)[0] - spec_c.g.grid.center(j)[0], 2);
            CHECK(kc.values(i, j) == doctest::Approx(std::max(spec_c.delta, 2.0 - d2)).epsilon(1e-14));
        }
}

TEST_CASE("kkt_residuals: exact optimum has zero residuals, perturbations grow quadratically") {
    auto spec = uniform_spec(32);
    auto duals = make_duals(spec, Vec<double>::Constant(32, 1.0 / 3.0), Vec<double>::Constant(32, 1.0 / 3.0));
    auto k = kkt_recover_coupling(duals, spec);
    auto res = kkt_residuals(k, duals, spec);
    CHECK(res.coupling < 1e-10);
    CHECK(res.marginal_x < 1e-10);
    CHECK(res.marginal_y < 1e-10);
    CHECK(res.duality_gap < 1e-10);

    // k = delta with zero duals: marginal residual |delta - 1| on the uniform case
    auto specd = uniform_spec(32, 0.05);
    auto zero = make_duals(specd, Vec<double>::Zero(32), Vec<double>::Zero(32));
    Coupling<double> kd(specd.f.grid, specd.g.grid, Mat<double>::Constant(32, 32, specd.delta), specd.delta);
    auto resd = kkt_residuals(kd, zero, specd);
    CHECK(resd.marginal_x == doctest::Approx(std::abs(specd.delta - 1.0)).epsilon(1e-12));

    // gap grows O(eps^2) around the optimum (strong convexity)
    double prev = -1;
    for (double eps : {1e-2, 5e-3, 2.5e-3}) {
        auto pert = make_duals(spec, Vec<double>::Constant(32, 1.0 / 3.0 + eps),
                               Vec<double>::Constant(32, 1.0 / 3.0 + eps));
        auto kp = kkt_recover_coupling(pert, spec);
        auto rp = kkt_residuals(kp, pert, spec);
        if (prev > 0) {
            // halving eps should quarter the gap
            CHECK(rp.duality_gap < 0.3 * prev);
        }
        prev = rp.duality_gap;
    }
}

TEST_CASE("G gradients: analytic values and finite differences") {
    auto spec = uniform_spec(32);
    const Eigen::Index n = 32;

    // u = v = 0, C = 0, delta = 0.01: D1G = delta - 1
    const Vec<double> zn = Vec<double>::Zero(n);
    auto [d1z, d2z] = G_gradients(zn, zn, spec);
    CHECK((d1z.array() + 0.99).abs().maxCoeff() < 1e-13);

    // stationarity at the optimum
    const Vec<double> third = Vec<double>::Constant(n, 1.0 / 3.0);
    auto [d1s, d2s] = G_gradients(third, third, spec);
    CHECK(d1s.lpNorm<Eigen::Infinity>() < 1e-13);
    CHECK(d2s.lpNorm<Eigen::Infinity>() < 1e-13);

    // directional finite difference: G(u+eh,v) - G(u,v) = e <D1G, h> + O(e^2)
    std::mt19937 rng(11);
    Vec<double> u = random_vec(n, rng, -0.3, 0.3);
    Vec<double> v = random_vec(n, rng, -0.3, 0.3);
    Vec<double> h = random_vec(n, rng);
    auto [d1, d2] = G_gradients(u, v, spec);
    const double base = G_eval(u, v, spec);
    const double slope = inner_l2(spec.f.grid, d1, h);
    double prev_err = -1;
    for (double eps : {1e-3, 5e-4, 2.5e-4}) {
        const double err = std::abs(G_eval<double>(u + eps * h, v, spec) - base - eps * slope);
        if (prev_err > 0) CHECK(err < 0.3 * prev_err);
        prev_err = err;
    }
}

TEST_CASE("G is c-strongly convex and Gw has alpha-Lipschitz gradients") {
    auto spec = asymmetric_spec(24);
    const double c = spec.c();
    const double vol = std::max(spec.volume_f(), spec.volume_g());
    const double E = spec.sup_bound();
    const double alpha = std::sqrt(2.0 * (vol * vol + (E - c / 4) * (E - c / 4)));

    std::mt19937 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        Vec<double> u = random_vec(24, rng, -1.0, 1.0);
        Vec<double> v = random_vec(24, rng, -1.0, 1.0);
        Vec<double> h = random_vec(24, rng, -1.0, 1.0);
        auto [d1a, d2a] = G_gradients<double>(u + h, v, spec);
        auto [d1b, d2b] = G_gradients<double>(u, v, spec);
        const double lhs = inner_l2(spec.f.grid, Vec<double>(d1a - d1b), h);
        CHECK(lhs >= c * norm_l2_sq(spec.f.grid, h) - 1e-12);

        auto [g1a, g2a] = Gw_gradients<double>(u + h, v, spec);
        auto [g1b, g2b] = Gw_gradients<double>(u, v, spec);
        CHECK(norm_l2(spec.f.grid, Vec<double>(g1a - g1b)) <= alpha * norm_l2(spec.f.grid, h) + 1e-12);
    }
}

TEST_CASE("weak duality holds for arbitrary feasible pairs") {
    auto spec = quadratic_cost_spec(12, 0.02, 2.0);
    std::mt19937 rng(5);
    for (int trial = 0; trial < 12; ++trial) {
        Mat<double> kv = Mat<double>::Constant(12, 12, spec.delta);
        for (Eigen::Index i = 0; i < 12; ++i)
            for (Eigen::Index j = 0; j < 12; ++j)
                kv(i, j) += std::abs(random_vec(1, rng, 0.0, 1.5)[0]);
        Coupling<double> k(spec.f.grid, spec.g.grid, kv, spec.delta);
        auto duals = make_duals(spec, random_vec(12, rng, -1.0, 0.8), random_vec(12, rng, -1.0, 0.8));
        CHECK(primal_objective(k, spec) + dual_objective(duals, spec) >= -1e-11);
    }
}

TEST_CASE("monotone truncation: clipping above approaches the objective from above") {
    auto spec = uniform_spec(16, 0.01);
    Mat<double> kv = Mat<double>::Constant(16, 16, 0.5);
    kv(3, 7) = 9.0; // spike
    kv(12, 2) = 5.0;
    Coupling<double> k(spec.f.grid, spec.g.grid, kv, spec.delta);
    const double base = primal_objective(k, spec);

    double prev_excess = std::numeric_limits<double>::infinity();
    for (double kappa : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        Coupling<double> kc(spec.f.grid, spec.g.grid, kv.cwiseMin(kappa), spec.delta);
        const double excess = std::max(0.0, primal_objective(kc, spec) - base);
        CHECK(excess <= prev_excess + 1e-14);
        prev_excess = excess;
    }
    Coupling<double> kfull(spec.f.grid, spec.g.grid, kv.cwiseMin(16.0), spec.delta);
    CHECK(primal_objective(kfull, spec) == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("pearson divergence: mutated zero cell is rejected") {
    auto spec = uniform_spec(8);
    auto nu = spec.f;
    nu.values[3] = 0.0;
    CHECK_THROWS_AS(pearson_divergence<double>(spec.f.values, nu), InvalidDensity);
}

TEST_CASE("cost grid: discrete Hoelder modulus") {
    auto g = unit_grid(32);
    auto c = CostGrid<double>::squared_distance(g, g, 1.0);
    // |x-y|^2 has neighbor differences <= 2 h on the unit square
    CHECK(c.discrete_modulus(1.0) <= 2.0 + 1e-12);
    auto z = CostGrid<double>::zero(g, g);
    CHECK(z.discrete_modulus(1.0) == 0.0);
}

TEST_CASE("coupling marginal cache matches quadrature") {
    auto spec = uniform_spec(16);
    std::mt19937 rng(17);
    Mat<double> kv(16, 16);
    for (Eigen::Index i = 0; i < 16; ++i)
        for (Eigen::Index j = 0; j < 16; ++j) kv(i, j) = 0.1 + std::abs(random_vec(1, rng)[0]);
    Coupling<double> k(spec.f.grid, spec.g.grid, kv, 0.05);
    auto [kx, ky] = marginals(k);
    CHECK((k.kx - kx).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((k.ky - ky).lpNorm<Eigen::Infinity>() == 0.0);
}
