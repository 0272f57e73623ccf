#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "uot/errors.hpp"

namespace uot {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// One axis of a uniform cell-centered grid on [lo, hi] with n cells.
template <typename Scalar>
struct GridAxis {
    Scalar lo{0};
    Scalar hi{1};
    Eigen::Index n{0};

    Scalar step() const { return (hi - lo) / Scalar(n); }
    Scalar center(Eigen::Index i) const { return lo + (Scalar(i) + Scalar(0.5)) * step(); }
    Scalar length() const { return hi - lo; }

    Vec<Scalar> centers() const {
        Vec<Scalar> x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = center(i);
        return x;
    }

    bool operator==(const GridAxis& o) const { return lo == o.lo && hi == o.hi && n == o.n; }
    bool operator!=(const GridAxis& o) const { return !(*this == o); }
};

// Tensor-product grid; values attached to it are stored row-major
// (last axis fastest).
template <typename Scalar>
struct Grid {
    std::vector<GridAxis<Scalar>> axes;

    Grid() = default;
    explicit Grid(std::vector<GridAxis<Scalar>> a) : axes(std::move(a)) {}
    Grid(Scalar lo, Scalar hi, Eigen::Index n) : axes{GridAxis<Scalar>{lo, hi, n}} {}

    int dimension() const { return static_cast<int>(axes.size()); }

    Eigen::Index size() const {
        Eigen::Index s = 1;
        for (const auto& a : axes) s *= a.n;
        return s;
    }

    // Quadrature weight of one cell (midpoint rule).
    Scalar cell_volume() const {
        Scalar v = 1;
        for (const auto& a : axes) v *= a.step();
        return v;
    }

    // Lebesgue measure of the support box.
    Scalar volume() const {
        Scalar v = 1;
        for (const auto& a : axes) v *= a.length();
        return v;
    }

    Vec<Scalar> center(Eigen::Index flat) const {
        Vec<Scalar> x(dimension());
        for (int ax = dimension() - 1; ax >= 0; --ax) {
            const Eigen::Index n = axes[size_t(ax)].n;
            x[ax] = axes[size_t(ax)].center(flat % n);
            flat /= n;
        }
        return x;
    }

    bool operator==(const Grid& o) const { return axes == o.axes; }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

// Midpoint-rule reductions. Every integral in the library goes through
// these so that discrete duality identities hold to roundoff.
template <typename Scalar, typename Derived>
Scalar integrate(const Grid<Scalar>& g, const Eigen::MatrixBase<Derived>& values) {
    return g.cell_volume() * values.sum();
}

template <typename Scalar, typename A, typename B>
Scalar inner_l2(const Grid<Scalar>& g, const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
    return g.cell_volume() * (u.array() * v.array()).sum();
}

template <typename Scalar, typename Derived>
Scalar norm_l2_sq(const Grid<Scalar>& g, const Eigen::MatrixBase<Derived>& u) {
    return g.cell_volume() * u.array().square().sum();
}

template <typename Scalar, typename Derived>
Scalar norm_l2(const Grid<Scalar>& g, const Eigen::MatrixBase<Derived>& u) {
    return std::sqrt(norm_l2_sq(g, u));
}

template <typename Scalar, typename Derived>
Scalar norm_l1(const Grid<Scalar>& g, const Eigen::MatrixBase<Derived>& u) {
    return g.cell_volume() * u.array().abs().sum();
}

// Product-grid integral of an (Nf x Ng) matrix of samples.
template <typename Scalar, typename Derived>
Scalar integrate_product(const Grid<Scalar>& gf, const Grid<Scalar>& gg,
                         const Eigen::MatrixBase<Derived>& values) {
    return gf.cell_volume() * gg.cell_volume() * values.sum();
}

template <typename Scalar, typename Derived>
Scalar norm_l2_sq_product(const Grid<Scalar>& gf, const Grid<Scalar>& gg,
                          const Eigen::MatrixBase<Derived>& values) {
    return gf.cell_volume() * gg.cell_volume() * values.array().square().sum();
}

inline void require(bool cond, const char* what) {
    if (!cond) throw SpecError(what);
}

} // namespace uot
