#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "uot/monge_ampere.hpp"

using namespace uot;
using namespace uot::testing;

namespace {

GridAxis<double> axis(double lo, double hi, Eigen::Index n) { return GridAxis<double>{lo, hi, n}; }

} // namespace

TEST_CASE("solve_1d: equal marginals give the identity") {
    const auto ax = axis(0, 1, 64);
    std::mt19937 rng(2);
    Vec<double> kx = random_vec(64, rng, 0.5, 1.5);
    auto map = solve_1d(ax, kx, ax, kx);
    for (Eigen::Index i = 0; i < 64; ++i)
        CHECK(map.axes[0].T[i] == doctest::Approx(ax.center(i)).epsilon(1e-12));
}

TEST_CASE("solve_1d: dilation and shift") {
    const auto ax = axis(0, 1, 64);
    const auto ay = axis(0, 2, 64);
    Vec<double> kx = Vec<double>::Ones(64);
    Vec<double> ky = Vec<double>::Constant(64, 0.5);
    auto map = solve_1d(ax, kx, ay, ky);
    for (Eigen::Index i = 0; i < 64; ++i)
        CHECK(map.axes[0].T[i] == doctest::Approx(2.0 * ax.center(i)).epsilon(1e-12));
    // FD derivative of a linear map is exact
    CHECK((map.axes[0].dT.array() - 2.0).abs().maxCoeff() < 1e-12);

    const auto az = axis(1, 2, 64);
    auto shift = solve_1d(ax, kx, az, kx);
    for (Eigen::Index i = 0; i < 64; ++i)
        CHECK(shift.axes[0].T[i] == doctest::Approx(ax.center(i) + 1.0).epsilon(1e-12));
}

TEST_CASE("solve_1d: error paths") {
    const auto ax = axis(0, 1, 16);
    Vec<double> kx = Vec<double>::Ones(16);
    Vec<double> ky = Vec<double>::Constant(16, 1.5);
    CHECK_THROWS_AS(solve_1d(ax, kx, ax, ky), MassMismatch);

    Vec<double> bad = kx;
    bad[7] = 0.0;
    CHECK_THROWS_AS(solve_1d(ax, kx, ax, bad), InvalidDensity);
}

TEST_CASE("solve_1d: monotonicity is exact") {
    const auto ax = axis(-1, 1, 48);
    std::mt19937 rng(9);
    Vec<double> kx = random_vec(48, rng, 0.2, 2.0);
    Vec<double> ky = random_vec(48, rng, 0.2, 2.0);
    ky *= (ax.step() * kx.sum()) / (ax.step() * ky.sum());
    auto map = solve_1d(ax, kx, ax, ky);
    for (Eigen::Index i = 0; i + 1 < 48; ++i) CHECK(map.axes[0].T[i + 1] >= map.axes[0].T[i]);
}

TEST_CASE("solve_tensor: diagonal maps") {
    const auto ax = axis(0, 1, 32);
    Vec<double> ones = Vec<double>::Ones(32);

    auto ident = solve_tensor<double>({ax, ax}, {ones, ones}, {ax, ax}, {ones, ones});
    Vec<double> p(2);
    p << 0.3, 0.7;
    CHECK((ident.apply(p) - p).lpNorm<Eigen::Infinity>() < 1e-12);

    // uniform [0,1]^2 -> uniform [0,2]^2
    const auto ay = axis(0, 2, 32);
    Vec<double> half = Vec<double>::Constant(32, 0.5);
    auto dil = solve_tensor<double>({ax, ax}, {ones, ones}, {ay, ay}, {half, half});
    CHECK(dil.apply(p)[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(dil.apply(p)[1] == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(dil.jacobian_det(p) == doctest::Approx(4.0).epsilon(1e-10));

    // mixed: shift on axis 1, dilation on axis 2
    const auto az = axis(1, 2, 32);
    auto mixed = solve_tensor<double>({ax, ax}, {ones, ones}, {az, ay}, {ones, half});
    CHECK(mixed.apply(p)[0] == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(mixed.apply(p)[1] == doctest::Approx(1.4).epsilon(1e-12));

    CHECK_THROWS_AS((solve_tensor<double>({ax}, {ones, ones}, {ax}, {ones})), Unsupported);
}

TEST_CASE("ma_residual: analytic cases") {
    const Eigen::Index n = 64;
    const auto ax = axis(0, 1, n);
    const auto ay = axis(0, 2, n);
    Grid<double> gx(0, 1, n), gy(0, 2, n);
    Vec<double> kx = Vec<double>::Ones(n);
    Vec<double> ky = Vec<double>::Constant(n, 0.5);

    auto dil = solve_1d(ax, kx, ay, ky);
    auto rep = ma_residual(dil, gx, kx, gy, ky);
    CHECK(rep.sup <= 2.0 * rep.grid_step);

    auto ident = solve_1d(ax, kx, ax, kx);
    auto rep2 = ma_residual(ident, gx, kx, gx, kx);
    CHECK(rep2.sup <= 1e-12);
}

TEST_CASE("ma_residual: wrong map measures the marginal gap") {
    const Eigen::Index n = 32;
    const auto ax = axis(0, 1, n);
    Grid<double> gx(0, 1, n);
    Vec<double> kx = Vec<double>::Ones(n);
    Vec<double> ky(n);
    for (Eigen::Index i = 0; i < n; ++i) ky[i] = 0.5 + ax.center(i); // mass 1, nonuniform
    MonotoneMap<double> ident;
    AxisMap<double> am;
    am.source = ax;
    am.target = ax;
    am.T = ax.centers();
    finite_difference_derivative(am);
    ident.axes.push_back(am);
    auto rep = ma_residual(ident, gx, kx, gx, ky);
    // residual == |ky(x) - kx(x)| pointwise; interior sup = max over interior cells
    double expect = 0;
    for (Eigen::Index i = 1; i + 1 < n; ++i) expect = std::max(expect, std::abs(ky[i] - kx[i]));
    CHECK(rep.sup == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("pushforward test: moments transported to O(h)") {
    const Eigen::Index n = 64;
    const auto ax = axis(0, 1, n);
    const auto ay = axis(0, 2, n);
    Grid<double> gx(0, 1, n), gy(0, 2, n);
    Vec<double> kx = Vec<double>::Ones(n);
    Vec<double> ky = Vec<double>::Constant(n, 0.5);
    auto map = solve_1d(ax, kx, ay, ky);
    const double h = ax.step();

    std::mt19937 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        // bounded Lipschitz test function with |h|, Lip <= 1
        const double a = random_vec(1, rng, -1.0, 1.0)[0];
        const double b = random_vec(1, rng, 0.5, 3.0)[0];
        auto fn = [&](double y) { return std::sin(b * y + a) / std::max(1.0, b); };
        double lhs = 0, rhs = 0;
        for (Eigen::Index i = 0; i < n; ++i) lhs += fn(map.axes[0].T[i]) * kx[i] * h;
        for (Eigen::Index j = 0; j < n; ++j) rhs += fn(ay.center(j)) * ky[j] * ay.step();
        CHECK(std::abs(lhs - rhs) <= 2.0 * h);
    }
}

TEST_CASE("ma_residual: O(h) refinement on a smooth instance") {
    double prev = -1;
    for (Eigen::Index n : {32, 64, 128}) {
        const auto ax = axis(0, 1, n);
        Grid<double> gx(0, 1, n);
        Vec<double> kx(n), ky(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = ax.center(i);
            kx[i] = 1.0 + 0.3 * std::sin(2 * M_PI * x);
            ky[i] = 1.0 - 0.3 * std::sin(2 * M_PI * x);
        }
        // equalize masses exactly
        ky *= (kx.sum() / ky.sum());
        auto map = solve_1d(ax, kx, ax, ky);
        auto rep = ma_residual(map, gx, kx, gx, ky);
        if (prev > 0) CHECK(rep.sup < 0.65 * prev);
        prev = rep.sup;
    }
}
