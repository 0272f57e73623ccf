#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "uot/types.hpp"

namespace uot {

// Weighted point set; signed weights appear when two measures are compared.
template <typename Scalar>
struct DiscreteMeasure {
    Mat<Scalar> points; // N x d
    Vec<Scalar> weights;

    int dimension() const { return static_cast<int>(points.cols()); }
    Eigen::Index size() const { return points.rows(); }

    static DiscreteMeasure from_density(const GridDensity<Scalar>& rho) {
        DiscreteMeasure m;
        const Eigen::Index N = rho.grid.size();
        m.points.resize(N, rho.grid.dimension());
        m.weights.resize(N);
        const Scalar vol = rho.grid.cell_volume();
        for (Eigen::Index i = 0; i < N; ++i) {
            m.points.row(i) = rho.grid.center(i).transpose();
            m.weights[i] = rho.values[i] * vol;
        }
        return m;
    }

    static DiscreteMeasure from_samples(const Mat<Scalar>& points, const Vec<Scalar>& weights) {
        DiscreteMeasure m;
        m.points = points;
        m.weights = weights;
        return m;
    }
};

namespace detail {

// Dense tableau simplex for  max c.x  s.t.  A x <= rhs, x >= 0,  rhs >= 0.
// Starts from the slack basis; Dantzig pivoting with a Bland fallback once
// the objective stalls, which guarantees termination on degenerate bases.
template <typename Scalar>
struct SimplexResult {
    Vec<Scalar> x;
    Scalar objective{0};
    bool optimal{false};
};

template <typename Scalar>
SimplexResult<Scalar> simplex_max(const Mat<Scalar>& A, const Vec<Scalar>& rhs, const Vec<Scalar>& c) {
    const Eigen::Index m = A.rows();
    const Eigen::Index nv = A.cols();
    const Eigen::Index cols = nv + m + 1;
    const Scalar tol = Scalar(1e-10);

    // row-major tableau: pivoting is row-wise
    using Tableau = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Tableau T = Tableau::Zero(m + 1, cols);
    T.block(0, 0, m, nv) = A;
    for (Eigen::Index i = 0; i < m; ++i) T(i, nv + i) = Scalar(1);
    T.col(cols - 1).head(m) = rhs;
    for (Eigen::Index j = 0; j < nv; ++j) T(m, j) = -c[j];

    std::vector<Eigen::Index> basis(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[size_t(i)] = nv + i;

    bool bland = false;
    long stall = 0;
    Scalar last_obj = T(m, cols - 1);
    const long max_pivots = 80 * (m + nv);

    for (long pivots = 0; pivots < max_pivots; ++pivots) {
        // entering column
        Eigen::Index enter = -1;
        if (!bland) {
            Scalar best = -tol;
            for (Eigen::Index j = 0; j + 1 < cols; ++j)
                if (T(m, j) < best) {
                    best = T(m, j);
                    enter = j;
                }
        } else {
            for (Eigen::Index j = 0; j + 1 < cols; ++j)
                if (T(m, j) < -tol) {
                    enter = j;
                    break;
                }
        }
        if (enter < 0) {
            SimplexResult<Scalar> res;
            res.x = Vec<Scalar>::Zero(nv);
            for (Eigen::Index i = 0; i < m; ++i)
                if (basis[size_t(i)] < nv) res.x[basis[size_t(i)]] = T(i, cols - 1);
            res.objective = T(m, cols - 1);
            res.optimal = true;
            return res;
        }

        // ratio test; ties go to the largest pivot element unless Bland's
        // rule is active
        Eigen::Index leave = -1;
        Scalar best_ratio = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (T(i, enter) > tol) {
                const Scalar ratio = T(i, cols - 1) / T(i, enter);
                bool take = false;
                if (leave < 0 || ratio < best_ratio - Scalar(1e-12))
                    take = true;
                else if (ratio < best_ratio + Scalar(1e-12))
                    take = bland ? basis[size_t(i)] < basis[size_t(leave)] : T(i, enter) > T(leave, enter);
                if (take) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
        }
        if (leave < 0) throw InternalError("simplex_max: objective unbounded (malformed LP)");

        // pivot
        const Scalar piv = T(leave, enter);
        T.row(leave) /= piv;
        for (Eigen::Index i = 0; i <= m; ++i) {
            if (i == leave) continue;
            const Scalar factor = T(i, enter);
            if (factor != Scalar(0)) T.row(i) -= factor * T.row(leave);
        }
        basis[size_t(leave)] = enter;

        const Scalar obj = T(m, cols - 1);
        if (obj > last_obj + tol) {
            stall = 0;
            last_obj = obj;
        } else if (++stall > 4 * (m + nv)) {
            bland = true;
        }
    }
    throw InternalError("simplex_max: pivot budget exhausted");
}

} // namespace detail

template <typename Scalar>
struct DblResult {
    Scalar distance{0};
    Vec<Scalar> witness;   // phi at the union support points
    Scalar witness_sup{0}; // a
    Scalar witness_lip{0}; // b
    bool exact{true};      // false when the sampled-ridge fallback was used
};

struct DblOptions {
    Eigen::Index lp_cap_1d = 192; // union point budget, neighbor constraints
    Eigen::Index lp_cap_nd = 28;  // union point budget, full pairwise constraints
};

// Bounded-Lipschitz distance between discrete measures: the exact optimum of
//   max sum phi_i (mu_i - nu_i)   s.t. |phi_i| <= a, |phi_i - phi_j| <= b |p_i - p_j|, a + b <= 1.
// In one dimension the Lipschitz constraints are pruned to sorted neighbors,
// which is sufficient there; above the point cap a sampled-ridge lower bound
// is returned and flagged.
template <typename Scalar>
DblResult<Scalar> dbl_distance(const DiscreteMeasure<Scalar>& mu, const DiscreteMeasure<Scalar>& nu,
                               const DblOptions& opts = {}) {
    if (mu.dimension() != nu.dimension()) throw GridMismatch("dbl_distance: dimension mismatch");
    const int d = mu.dimension();
    const Eigen::Index n = mu.size() + nu.size();

    Mat<Scalar> pts(n, d);
    Vec<Scalar> w(n);
    pts.topRows(mu.size()) = mu.points;
    pts.bottomRows(nu.size()) = nu.points;
    w.head(mu.size()) = mu.weights;
    w.tail(nu.size()) = -nu.weights;

    const Eigen::Index cap = (d == 1) ? opts.lp_cap_1d : opts.lp_cap_nd;
    if (n > cap) {
        // sampled-ridge fallback: feasible cones phi(x) = s max(-a, a - b|x - c|)
        DblResult<Scalar> res;
        res.exact = false;
        Scalar best = 0;
        Vec<Scalar> best_phi = Vec<Scalar>::Zero(n);
        for (Eigen::Index ci = 0; ci < n; ++ci) {
            for (int ai = 1; ai <= 4; ++ai) {
                const Scalar a = Scalar(ai) / Scalar(4);
                const Scalar b = Scalar(1) - a;
                Vec<Scalar> phi(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const Scalar dist = (pts.row(i) - pts.row(ci)).norm();
                    phi[i] = std::max(-a, a - b * dist);
                }
                const Scalar val = std::abs(phi.dot(w));
                if (val > best) {
                    best = val;
                    best_phi = (phi.dot(w) >= 0 ? Scalar(1) : Scalar(-1)) * phi;
                    res.witness_sup = a;
                    res.witness_lip = b;
                }
            }
        }
        res.distance = best;
        res.witness = best_phi;
        return res;
    }

    // constraint pairs
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    if (d == 1) {
        std::vector<Eigen::Index> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index(0));
        std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return pts(i, 0) < pts(j, 0); });
        for (Eigen::Index k = 0; k + 1 < n; ++k) pairs.emplace_back(order[size_t(k)], order[size_t(k + 1)]);
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }

    // variables: phi+ (n), phi- (n), a, b
    const Eigen::Index nv = 2 * n + 2;
    const Eigen::Index m = 2 * n + 2 * Eigen::Index(pairs.size()) + 1;
    Mat<Scalar> A = Mat<Scalar>::Zero(m, nv);
    Vec<Scalar> rhs = Vec<Scalar>::Zero(m);
    Eigen::Index row = 0;
    const Eigen::Index col_a = 2 * n, col_b = 2 * n + 1;
    for (Eigen::Index i = 0; i < n; ++i) {
        A(row, i) = 1;
        A(row, n + i) = -1;
        A(row, col_a) = -1;
        ++row; // phi_i - a <= 0
        A(row, i) = -1;
        A(row, n + i) = 1;
        A(row, col_a) = -1;
        ++row; // -phi_i - a <= 0
    }
    for (const auto& [i, j] : pairs) {
        const Scalar dist = (pts.row(i) - pts.row(j)).norm();
        A(row, i) = 1;
        A(row, n + i) = -1;
        A(row, j) = -1;
        A(row, n + j) = 1;
        A(row, col_b) = -dist;
        ++row;
        A(row, i) = -1;
        A(row, n + i) = 1;
        A(row, j) = 1;
        A(row, n + j) = -1;
        A(row, col_b) = -dist;
        ++row;
    }
    A(row, col_a) = 1;
    A(row, col_b) = 1;
    rhs[row] = 1;
    ++row;

    Vec<Scalar> c = Vec<Scalar>::Zero(nv);
    c.head(n) = w;
    c.segment(n, n) = -w;

    auto sol = detail::simplex_max<Scalar>(A, rhs, c);
    DblResult<Scalar> res;
    res.distance = sol.objective;
    res.witness = sol.x.head(n) - sol.x.segment(n, n);
    res.witness_sup = sol.x[col_a];
    res.witness_lip = sol.x[col_b];
    res.exact = true;
    return res;
}

template <typename Scalar>
struct RateFit {
    Scalar ratio{0};
    Scalar r_squared{0};
};

// Per-step geometric decay ratio of a positive series by least squares on
// the log values.
template <typename Scalar>
RateFit<Scalar> rate_fit(const std::vector<Scalar>& series) {
    if (series.size() < 5) throw InvalidSeries("rate_fit: need at least 5 points");
    for (Scalar v : series)
        if (!(v > Scalar(0))) throw InvalidSeries("rate_fit: series must be strictly positive");
    const Eigen::Index n = Eigen::Index(series.size());
    Scalar sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar x = Scalar(i);
        const Scalar y = std::log(series[size_t(i)]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    const Scalar denom = Scalar(n) * sxx - sx * sx;
    const Scalar slope = (Scalar(n) * sxy - sx * sy) / denom;
    RateFit<Scalar> fit;
    fit.ratio = std::exp(slope);
    const Scalar ss_tot = syy - sy * sy / Scalar(n);
    const Scalar intercept = (sy - slope * sx) / Scalar(n);
    Scalar ss_res = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar e = std::log(series[size_t(i)]) - (intercept + slope * Scalar(i));
        ss_res += e * e;
    }
    fit.r_squared = ss_tot > Scalar(0) ? Scalar(1) - ss_res / ss_tot : Scalar(1);
    return fit;
}

} // namespace uot
