#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "uot/neural/quadrature.hpp"

namespace uot::neural {

// Physicists' Hermite polynomial H_n by the recurrence
// H_{n+1} = 2x H_n - 2n H_{n-1}.
template <typename Scalar>
Scalar hermite_poly(int n, Scalar x) {
    Scalar p0 = 1;
    if (n == 0) return p0;
    Scalar p1 = Scalar(2) * x;
    for (int k = 1; k < n; ++k) {
        const Scalar p2 = Scalar(2) * x * p1 - Scalar(2 * k) * p0;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

template <typename Scalar>
Scalar hermite_poly(const std::vector<int>& idx, const Vec<Scalar>& x) {
    Scalar acc = 1;
    for (size_t a = 0; a < idx.size(); ++a) acc *= hermite_poly(idx[a], x[Eigen::Index(a)]);
    return acc;
}

// Orthonormal value H_n(x)/sqrt(n! 2^n sqrt(pi)) through the stable
// normalized recurrence.
template <typename Scalar>
Scalar hermite_normalized(int n, Scalar x) {
    const Scalar pi_quarter = Scalar(0.7511255444649424828587030047762276930510L); // pi^{-1/4}
    Scalar h0 = pi_quarter;
    if (n == 0) return h0;
    Scalar h1 = std::sqrt(Scalar(2)) * x * pi_quarter;
    for (int k = 1; k < n; ++k) {
        const Scalar h2 = x * std::sqrt(Scalar(2) / Scalar(k + 1)) * h1 - std::sqrt(Scalar(k) / Scalar(k + 1)) * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

template <typename Scalar>
Scalar hermite_normalized(const std::vector<int>& idx, const Vec<Scalar>& x) {
    Scalar acc = 1;
    for (size_t a = 0; a < idx.size(); ++a) acc *= hermite_normalized(idx[a], x[Eigen::Index(a)]);
    return acc;
}

// sqrt(n! 2^n pi^{1/2}) per axis, multiplied over a multi-index.
template <typename Scalar>
Scalar hermite_norm_constant(const std::vector<int>& idx) {
    Scalar acc = 1;
    for (int n : idx) {
        Scalar fact = 1;
        for (int k = 2; k <= n; ++k) fact *= Scalar(k);
        acc *= fact * std::pow(Scalar(2), Scalar(n));
    }
    const Scalar pi = Scalar(3.14159265358979323846264338327950288L);
    return std::sqrt(acc * std::pow(pi, Scalar(idx.size()) / Scalar(2)));
}

// Monomial coefficients of H_n: H_n(x) = sum_k coef[k] x^k.
template <typename Scalar>
Vec<Scalar> hermite_monomial_coeffs(int n) {
    std::vector<Vec<Scalar>> table;
    table.push_back(Vec<Scalar>::Constant(1, Scalar(1)));
    if (n >= 1) {
        Vec<Scalar> h1 = Vec<Scalar>::Zero(2);
        h1[1] = Scalar(2);
        table.push_back(h1);
    }
    for (int k = 1; k < n; ++k) {
        Vec<Scalar> next = Vec<Scalar>::Zero(k + 2);
        next.segment(1, k + 1) += Scalar(2) * table[size_t(k)];
        next.head(k) -= Scalar(2 * k) * table[size_t(k - 1)];
        table.push_back(next);
    }
    return table[size_t(n)];
}

// All multi-indices with every component <= cap, in deterministic
// lexicographic order.
inline std::vector<std::vector<int>> multi_indices(int d, int cap) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(size_t(d), 0);
    while (true) {
        out.push_back(cur);
        int a = d - 1;
        while (a >= 0) {
            if (++cur[size_t(a)] <= cap) break;
            cur[size_t(a)] = 0;
            --a;
        }
        if (a < 0) break;
    }
    return out;
}

inline int index_sum(const std::vector<int>& idx) {
    int s = 0;
    for (int v : idx) s += v;
    return s;
}

// Fejer-type attenuation prod_{l: n_l > nbold} (2 - n_l/nbold); equals one
// for indices within the principal block.
template <typename Scalar>
Scalar fejer_weight(const std::vector<int>& idx, int nbold) {
    Scalar w = 1;
    for (int v : idx)
        if (v > nbold) w *= Scalar(2) - Scalar(v) / Scalar(nbold);
    return w;
}

template <typename Scalar>
struct HermiteExpansion {
    int dimension{1};
    int nbold{1};                        // principal degree parameter
    int cap{1};                          // component cap of the index set (2 nbold - 1 by default)
    std::vector<std::vector<int>> index; // all multi-indices <= cap
    Mat<Scalar> coeffs;                  // index x component, orthonormal convention
    Vec<Scalar> fejer;                   // attenuation per index

    // truncated reconstruction with Fejer weights
    Vec<Scalar> eval(const Vec<Scalar>& x) const {
        Vec<Scalar> out = Vec<Scalar>::Zero(coeffs.cols());
        for (size_t i = 0; i < index.size(); ++i) {
            const Scalar basis = hermite_normalized(index[i], x);
            out += fejer[Eigen::Index(i)] * basis * coeffs.row(Eigen::Index(i)).transpose();
        }
        return out;
    }
};

// Weighted projection coefficients of a (vector-valued) field against the
// orthonormal Hermite system: c_n = int field_j(x) hbar_n(x) e^{-|x|^2} dx,
// by composite Gauss-Legendre over the field's support box. The rule is
// accepted only once doubling the panel count moves no coefficient by more
// than the resolution tolerance.
template <typename Scalar>
HermiteExpansion<Scalar> hermite_coeffs(const std::function<Vec<Scalar>(const Vec<Scalar>&)>& field,
                                        const Grid<Scalar>& support, int nbold, int cap, int components,
                                        int panels_hint = 0, Scalar resolution_tol = Scalar(1e-4)) {
    if (nbold < 1) throw InvalidParameter("hermite_coeffs: nbold must be >= 1");
    const int d = support.dimension();
    HermiteExpansion<Scalar> exp;
    exp.dimension = d;
    exp.nbold = nbold;
    exp.cap = cap;
    exp.index = multi_indices(d, cap);
    exp.fejer.resize(Eigen::Index(exp.index.size()));
    for (size_t i = 0; i < exp.index.size(); ++i) exp.fejer[Eigen::Index(i)] = fejer_weight<Scalar>(exp.index[i], nbold);

    auto project = [&](int panels) {
        Mat<Scalar> coeffs = Mat<Scalar>::Zero(Eigen::Index(exp.index.size()), components);
        if (d == 1) {
            auto rule = composite_gl<Scalar>(support.axes[0].lo, support.axes[0].hi, panels, 16);
            Vec<Scalar> x(1);
            for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
                x[0] = rule.nodes[q];
                const Vec<Scalar> fx = field(x);
                const Scalar weight = rule.weights[q] * std::exp(-x[0] * x[0]);
                for (size_t i = 0; i < exp.index.size(); ++i)
                    coeffs.row(Eigen::Index(i)) += weight * hermite_normalized(exp.index[i][0], x[0]) * fx.transpose();
            }
        } else if (d == 2) {
            auto rx = composite_gl<Scalar>(support.axes[0].lo, support.axes[0].hi, panels, 12);
            auto ry = composite_gl<Scalar>(support.axes[1].lo, support.axes[1].hi, panels, 12);
            Vec<Scalar> x(2);
            for (Eigen::Index qa = 0; qa < rx.nodes.size(); ++qa)
                for (Eigen::Index qb = 0; qb < ry.nodes.size(); ++qb) {
                    x[0] = rx.nodes[qa];
                    x[1] = ry.nodes[qb];
                    const Vec<Scalar> fx = field(x);
                    const Scalar weight = rx.weights[qa] * ry.weights[qb] * std::exp(-x.squaredNorm());
                    for (size_t i = 0; i < exp.index.size(); ++i)
                        coeffs.row(Eigen::Index(i)) += weight * hermite_normalized(exp.index[i], x) * fx.transpose();
                }
        } else {
            throw Unsupported("hermite_coeffs: dimensions above 2 are not implemented");
        }
        return coeffs;
    };

    const int base_panels = std::max({8, 2 * cap, panels_hint});
    Mat<Scalar> a = project(base_panels);
    Mat<Scalar> b = project(2 * base_panels);
    const Scalar drift = (a - b).template lpNorm<Eigen::Infinity>();
    const Scalar scale = std::max(Scalar(1), b.template lpNorm<Eigen::Infinity>());
    if (drift > std::max(resolution_tol * scale, Scalar(1e-12)))
        throw Unresolved("hermite_coeffs: quadrature does not resolve the requested degree");
    exp.coeffs = std::move(b);
    return exp;
}

} // namespace uot::neural
