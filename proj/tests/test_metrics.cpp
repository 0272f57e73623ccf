#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "uot/metrics.hpp"

using namespace uot;
using namespace uot::testing;

namespace {

DiscreteMeasure<double> points_1d(std::initializer_list<double> xs, std::initializer_list<double> ws) {
    Mat<double> p(Eigen::Index(xs.size()), 1);
    Vec<double> w(Eigen::Index(ws.size()));
    Eigen::Index i = 0;
    for (double x : xs) p(i++, 0) = x;
    i = 0;
    for (double v : ws) w[i++] = v;
    return DiscreteMeasure<double>::from_samples(p, w);
}

void check_witness_feasible(const DblResult<double>& res, const DiscreteMeasure<double>& mu,
                            const DiscreteMeasure<double>& nu) {
    Mat<double> pts(mu.size() + nu.size(), mu.dimension());
    pts.topRows(mu.size()) = mu.points;
    pts.bottomRows(nu.size()) = nu.points;
    const double a = res.witness_sup, b = res.witness_lip;
    CHECK(a + b <= 1.0 + 1e-10);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        CHECK(std::abs(res.witness[i]) <= a + 1e-10);
        for (Eigen::Index j = 0; j < pts.rows(); ++j) {
            const double dist = (pts.row(i) - pts.row(j)).norm();
            CHECK(res.witness[i] - res.witness[j] <= b * dist + 1e-10);
        }
    }
}

} // namespace

TEST_CASE("dbl_distance: identical measures vanish") {
    auto mu = points_1d({0.1, 0.5, 0.9}, {1.0, 2.0, 0.5});
    auto res = dbl_distance(mu, mu);
    CHECK(res.distance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dbl_distance: two-point analytic optimum") {
    for (double h : {0.25, 0.5, 1.0, 1.9}) {
        auto mu = points_1d({0.0}, {1.0});
        auto nu = points_1d({h}, {1.0});
        auto res = dbl_distance(mu, nu);
        CHECK(res.exact);
        CHECK(res.distance == doctest::Approx(2.0 * h / (2.0 + h)).epsilon(1e-9));
        check_witness_feasible(res, mu, nu);
    }
    // at h = 2 the crossing value is exactly 1; beyond that the optimum
    // keeps following 2h/(2+h) and saturates at the total variation 2
    auto mu = points_1d({0.0}, {1.0});
    auto nu = points_1d({2.0}, {1.0});
    CHECK(dbl_distance(mu, nu).distance == doctest::Approx(1.0).epsilon(1e-9));
    auto far = points_1d({2.5}, {1.0});
    CHECK(dbl_distance(mu, far).distance == doctest::Approx(2.0 * 2.5 / 4.5).epsilon(1e-9));
}

TEST_CASE("dbl_distance: metric properties on random instances") {
    std::mt19937 rng(13);
    auto random_measure = [&](int n) {
        Mat<double> p(n, 1);
        Vec<double> w(n);
        for (int i = 0; i < n; ++i) {
            p(i, 0) = random_vec(1, rng, 0.0, 2.0)[0];
            w[i] = random_vec(1, rng, 0.05, 0.4)[0];
        }
        return DiscreteMeasure<double>::from_samples(p, w);
    };
    for (int trial = 0; trial < 5; ++trial) {
        auto mu = random_measure(4);
        auto nu = random_measure(5);
        auto rho = random_measure(3);
        const double dmn = dbl_distance(mu, nu).distance;
        const double dnm = dbl_distance(nu, mu).distance;
        CHECK(dmn == doctest::Approx(dnm).epsilon(1e-10));
        const double dmr = dbl_distance(mu, rho).distance;
        const double drn = dbl_distance(rho, nu).distance;
        CHECK(dmn <= dmr + drn + 1e-9);
        // dominated by total variation mass (a = 1, b = 0 is feasible)
        double tv = mu.weights.sum() + nu.weights.sum(); // disjoint supports almost surely
        CHECK(dmn <= tv + 1e-9);
    }
}

TEST_CASE("dbl_distance: witness satisfies all constraints with slack") {
    std::mt19937 rng(29);
    Mat<double> p(6, 1);
    Vec<double> w(6);
    for (int i = 0; i < 6; ++i) {
        p(i, 0) = random_vec(1, rng, -1.0, 1.0)[0];
        w[i] = random_vec(1, rng, -0.5, 0.5)[0];
    }
    auto mu = DiscreteMeasure<double>::from_samples(p, w);
    auto nu = points_1d({0.0}, {0.0});
    auto res = dbl_distance(mu, nu);
    check_witness_feasible(res, mu, nu);
    CHECK(res.distance == doctest::Approx(res.witness.head(6).dot(w)).epsilon(1e-9));
}

TEST_CASE("dbl_distance: 2-D measures with full pairwise constraints") {
    Mat<double> p1(2, 2), p2(2, 2);
    p1 << 0, 0, 1, 0;
    p2 << 0, 0.5, 1, 0.5;
    Vec<double> w = Vec<double>::Constant(2, 0.5);
    auto mu = DiscreteMeasure<double>::from_samples(p1, w);
    auto nu = DiscreteMeasure<double>::from_samples(p2, w);
    auto res = dbl_distance(mu, nu);
    CHECK(res.exact);
    // each unit of mass moves by 0.5: optimum of the two-point problem scaled
    CHECK(res.distance == doctest::Approx(2.0 * 0.5 / (2.0 + 0.5)).epsilon(1e-9));
}

TEST_CASE("dbl_distance: fallback beyond the LP cap is a flagged lower bound") {
    std::mt19937 rng(41);
    const int n = 40; // above the 2-D cap
    Mat<double> p(n, 2);
    Vec<double> w(n);
    for (int i = 0; i < n; ++i) {
        p(i, 0) = random_vec(1, rng, 0.0, 1.0)[0];
        p(i, 1) = random_vec(1, rng, 0.0, 1.0)[0];
        w[i] = 1.0 / n;
    }
    auto mu = DiscreteMeasure<double>::from_samples(p, w);
    auto nu = DiscreteMeasure<double>::from_samples(Mat<double>(p.array() + 0.3), w);
    auto res = dbl_distance(mu, nu);
    CHECK_FALSE(res.exact);
    CHECK(res.distance > 0.0);
    // lower bound cannot exceed the total variation bound
    CHECK(res.distance <= mu.weights.sum() + nu.weights.sum());
}

TEST_CASE("dbl_distance: density lumping agrees with the analytic shift limit") {
    Grid<double> g(0, 1, 32);
    auto f = constant_density(g, 1.0);
    auto mu = DiscreteMeasure<double>::from_density(f);
    CHECK(mu.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    auto res = dbl_distance(mu, mu);
    CHECK(res.distance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rate_fit: exact and noisy geometric series") {
    std::vector<double> series;
    for (int i = 0; i < 12; ++i) series.push_back(std::pow(0.5, i));
    auto fit = rate_fit(series);
    CHECK(fit.ratio == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937 rng(3);
    std::vector<double> noisy;
    for (int i = 0; i < 20; ++i) {
        const double eps = 0.05 * (2.0 * double(rng()) / double(std::mt19937::max()) - 1.0);
        noisy.push_back(std::pow(0.7, i) * (1.0 + eps));
    }
    auto nf = rate_fit(noisy);
    CHECK(std::abs(nf.ratio - 0.7) < 0.03);

    CHECK_THROWS_AS(rate_fit<double>({1.0, 0.5, -0.25, 0.125, 0.06}), InvalidSeries);
    CHECK_THROWS_AS(rate_fit<double>({1.0, 0.5}), InvalidSeries);
}
