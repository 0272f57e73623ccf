#pragma once

#include <vector>

#include "uot/neural/hermite.hpp"

namespace uot::neural {

// N_m = C(m + d - 1, d - 1): dimension of the homogeneous polynomials of
// degree m in d variables, and the count of nonnegative integer solutions
// of b_1 + ... + b_{d-1} <= m.
inline long ridge_count(int m, int d) {
    long num = 1, den = 1;
    for (int k = 1; k <= d - 1; ++k) {
        num *= m + k;
        den *= k;
    }
    return num / den;
}

// Nonnegative integer points with coordinate sum <= m in d-1 variables,
// deterministic lexicographic order.
inline std::vector<std::vector<int>> interpolation_points(int m, int d) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(size_t(d - 1), 0);
    if (d == 1) {
        out.push_back({}); // single empty point; the lone direction is (1)
        return out;
    }
    while (true) {
        int s = 0;
        for (int v : cur) s += v;
        if (s <= m) out.push_back(cur);
        int a = d - 2;
        while (a >= 0) {
            if (++cur[size_t(a)] <= m) break;
            cur[size_t(a)] = 0;
            --a;
        }
        if (a < 0) break;
    }
    return out;
}

// Directions v = (1, u_1, ..., u_{d-1}) whose degree-m powers (x.v)^m span
// the homogeneous polynomials of degree m.
template <typename Scalar>
struct RidgeBasis {
    int degree{0};
    int dimension{1};
    std::vector<Vec<Scalar>> directions; // N_m vectors of length d

    Scalar monomial(Eigen::Index m_index, const Vec<Scalar>& x) const {
        const Scalar t = directions[size_t(m_index)].dot(x);
        Scalar acc = 1;
        for (int k = 0; k < degree; ++k) acc *= t;
        return acc;
    }
};

template <typename Scalar>
RidgeBasis<Scalar> ridge_decompose(int m, int d) {
    if (m < 0 || d < 1) throw InvalidParameter("ridge_decompose: need m >= 0, d >= 1");
    RidgeBasis<Scalar> basis;
    basis.degree = m;
    basis.dimension = d;
    for (const auto& u : interpolation_points(m, d)) {
        Vec<Scalar> v(d);
        v[0] = Scalar(1);
        for (int a = 1; a < d; ++a) v[a] = Scalar(u[size_t(a - 1)]);
        basis.directions.push_back(std::move(v));
    }
    if (long(basis.directions.size()) != ridge_count(m, d))
        throw InternalError("ridge_decompose: direction count mismatch");
    return basis;
}

namespace detail {

// exponent tuples beta with |beta| = m, in deterministic order
inline std::vector<std::vector<int>> homogeneous_exponents(int m, int d) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(size_t(d), 0);
    cur[0] = m;
    while (true) {
        out.push_back(cur);
        // next composition of m into d parts (colex-style rollover)
        int a = d - 1;
        // find a position before the last with something to move
        int k = -1;
        for (int i = d - 2; i >= 0; --i)
            if (cur[size_t(i)] > 0) {
                k = i;
                break;
            }
        if (k < 0) break;
        cur[size_t(k)] -= 1;
        int rest = 1;
        for (int i = k + 1; i < d; ++i) {
            rest += cur[size_t(i)];
            cur[size_t(i)] = 0;
        }
        cur[size_t(k + 1)] = rest;
        (void)a;
    }
    return out;
}

template <typename Scalar>
Scalar multinomial(int m, const std::vector<int>& beta) {
    Scalar acc = 1;
    int used = 0;
    for (int b : beta) {
        for (int j = 1; j <= b; ++j) {
            acc *= Scalar(used + j);
            acc /= Scalar(j);
        }
        used += b;
    }
    (void)m;
    return acc;
}

} // namespace detail

// h coefficients per degree: H_idx(x) = sum_m sum_j h[m][j] (x . v_{m,j})^m.
template <typename Scalar>
struct RidgeExpression {
    std::vector<int> hermite_index;
    std::vector<Vec<Scalar>> h; // per degree m = 0..|idx|, length N_m
};

// Expand a product Hermite polynomial into ridge monomials by matching
// monomial coefficients degree by degree; the Vandermonde-type systems are
// full rank for the integer directions (interpolation property).
template <typename Scalar>
RidgeExpression<Scalar> express(const std::vector<int>& idx, int d) {
    RidgeExpression<Scalar> out;
    out.hermite_index = idx;
    const int total = index_sum(idx);

    // per-axis monomial coefficients
    std::vector<Vec<Scalar>> axis_coeffs;
    for (int n : idx) axis_coeffs.push_back(hermite_monomial_coeffs<Scalar>(n));

    for (int m = 0; m <= total; ++m) {
        auto exps = detail::homogeneous_exponents(m, d);
        auto basis = ridge_decompose<Scalar>(m, d);
        const Eigen::Index nm = Eigen::Index(basis.directions.size());
        if (Eigen::Index(exps.size()) != nm) throw InternalError("express: exponent/direction count mismatch");

        // right-hand side: monomial coefficients of the Hermite product at
        // exactly these exponents (the product has matching parity, so many
        // entries vanish)
        Vec<Scalar> rhs(nm);
        for (Eigen::Index e = 0; e < nm; ++e) {
            Scalar coef = 1;
            bool present = true;
            for (int a = 0; a < d; ++a) {
                const int beta = exps[size_t(e)][size_t(a)];
                const auto& poly = axis_coeffs[size_t(a)];
                if (beta >= poly.size() || poly[beta] == Scalar(0)) {
                    present = false;
                    break;
                }
                coef *= poly[beta];
            }
            rhs[e] = present ? coef : Scalar(0);
        }

        // A[e, j] = multinomial(m, beta_e) prod_a v_j[a]^beta_e[a]
        Mat<Scalar> A(nm, nm);
        for (Eigen::Index e = 0; e < nm; ++e) {
            const Scalar mult = detail::multinomial<Scalar>(m, exps[size_t(e)]);
            for (Eigen::Index j = 0; j < nm; ++j) {
                Scalar p = 1;
                for (int a = 0; a < d; ++a) {
                    const int beta = exps[size_t(e)][size_t(a)];
                    for (int k = 0; k < beta; ++k) p *= basis.directions[size_t(j)][a];
                }
                A(e, j) = mult * p;
            }
        }
        Eigen::FullPivLU<Mat<Scalar>> lu(A);
        if (!lu.isInvertible())
            throw InternalError("express: ridge system is rank deficient (interpolation property violated)");
        out.h.push_back(lu.solve(rhs));
    }
    return out;
}

} // namespace uot::neural
