#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "uot/grid.hpp"

namespace uot::neural {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
// Legendre recurrence; deterministic to roundoff.
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> gauss_legendre(int n) {
    Vec<Scalar> x(n), w(n);
    const Scalar pi = Scalar(3.14159265358979323846264338327950288L);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        Scalar z = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
        Scalar pp = 0;
        for (int it = 0; it < 100; ++it) {
            Scalar p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                const Scalar p2 = p1;
                p1 = p0;
                p0 = ((Scalar(2 * j + 1)) * z * p1 - Scalar(j) * p2) / Scalar(j + 1);
            }
            pp = Scalar(n) * (z * p0 - p1) / (z * z - Scalar(1));
            const Scalar dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < Scalar(1e-16)) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = Scalar(2) / ((Scalar(1) - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    return {std::move(x), std::move(w)};
}

// Composite Gauss-Legendre rule over [a, b] with `panels` panels of
// `order` nodes each.
template <typename Scalar>
struct CompositeRule {
    Vec<Scalar> nodes;
    Vec<Scalar> weights;
};

template <typename Scalar>
CompositeRule<Scalar> composite_gl(Scalar a, Scalar b, int panels, int order) {
    auto [x, w] = gauss_legendre<Scalar>(order);
    CompositeRule<Scalar> rule;
    rule.nodes.resize(Eigen::Index(panels) * order);
    rule.weights.resize(Eigen::Index(panels) * order);
    const Scalar hp = (b - a) / Scalar(panels);
    Eigen::Index k = 0;
    for (int p = 0; p < panels; ++p) {
        const Scalar lo = a + Scalar(p) * hp;
        for (int i = 0; i < order; ++i, ++k) {
            rule.nodes[k] = lo + Scalar(0.5) * hp * (x[i] + Scalar(1));
            rule.weights[k] = Scalar(0.5) * hp * w[i];
        }
    }
    return rule;
}

} // namespace uot::neural
