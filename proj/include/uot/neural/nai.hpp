#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uot/neural/quadrature.hpp"

namespace uot::neural {

enum class Activation { relu, sigmoid, custom };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        default: return "custom";
    }
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "custom") return Activation::custom;
    throw Unsupported("unknown activation: " + name);
}

template <typename Scalar>
Scalar sigma_eval(Activation a, Scalar x) {
    switch (a) {
        case Activation::relu: return x > Scalar(0) ? x : Scalar(0);
        case Activation::sigmoid: return Scalar(1) / (Scalar(1) + std::exp(-x));
        default: throw Unsupported("custom activations need an explicit kernel");
    }
}

// Finite combination Gamma(x) = sum_i W'_i sigma(A'_i x + b'_i) forming an
// approximate identity under dilation Gamma_s(x) = Gamma(x/s)/s.
template <typename Scalar>
struct NaiKernel {
    Activation activation{Activation::relu};
    std::function<Scalar(Scalar)> sigma; // set for custom activations
    Vec<Scalar> W, A, b;
    Scalar support_radius{0}; // 0 = unbounded tails

    int units() const { return int(W.size()); }

    Scalar gamma(Scalar x) const {
        Scalar acc = 0;
        for (Eigen::Index i = 0; i < W.size(); ++i) {
            const Scalar arg = A[i] * x + b[i];
            acc += W[i] * (sigma ? sigma(arg) : sigma_eval(activation, arg));
        }
        return acc;
    }

    Scalar gamma_scaled(Scalar x, Scalar s) const { return gamma(x / s) / s; }
};

// ReLU second difference: the unit triangle, integral exactly one.
template <typename Scalar>
NaiKernel<Scalar> nai_kernel_relu() {
    NaiKernel<Scalar> k;
    k.activation = Activation::relu;
    k.W.resize(3);
    k.A.resize(3);
    k.b.resize(3);
    k.W << Scalar(1), Scalar(-2), Scalar(1);
    k.A << Scalar(1), Scalar(1), Scalar(1);
    k.b << Scalar(1), Scalar(0), Scalar(-1);
    k.support_radius = Scalar(1);
    return k;
}

// Sigmoid difference sigma(x + a) - sigma(x - a), normalized by its exact
// integral 2a.
template <typename Scalar>
NaiKernel<Scalar> nai_kernel_sigmoid(Scalar a = Scalar(1)) {
    NaiKernel<Scalar> k;
    k.activation = Activation::sigmoid;
    k.W.resize(2);
    k.A.resize(2);
    k.b.resize(2);
    k.W << Scalar(1) / (Scalar(2) * a), Scalar(-1) / (Scalar(2) * a);
    k.A << Scalar(1), Scalar(1);
    k.b << a, -a;
    k.support_radius = Scalar(0);
    return k;
}

template <typename Scalar>
NaiKernel<Scalar> nai_kernel(Activation a) {
    switch (a) {
        case Activation::relu: return nai_kernel_relu<Scalar>();
        case Activation::sigmoid: return nai_kernel_sigmoid<Scalar>();
        default: throw Unsupported("nai_kernel: custom activations must supply (N', W', A', b')");
    }
}

template <typename Scalar>
struct NaiAxioms {
    Scalar integral{0};       // int Gamma
    Scalar l1_mass{0};        // sup over tested widths of ||Gamma_s||_L1
    Scalar tail_mass{0};      // int_{|x|>rho} |Gamma_s| at the smallest width
    bool holds(Scalar tol) const { return std::abs(integral - Scalar(1)) <= tol && std::isfinite(l1_mass); }
};

// Numerical check of the approximate-identity axioms. The dilated-family
// integrals are evaluated in the reference variable u = x/s, where one
// quadrature rule resolves every width equally; tails of unbounded kernels
// are truncated where they fall below roundoff.
template <typename Scalar>
NaiAxioms<Scalar> check_nai(const NaiKernel<Scalar>& kernel, Scalar rho = Scalar(0.5)) {
    const Scalar R = kernel.support_radius > Scalar(0) ? kernel.support_radius : Scalar(64);
    auto rule = composite_gl<Scalar>(-R, R, 128, 16);
    NaiAxioms<Scalar> ax;
    Scalar l1_ref = 0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        const Scalar g = kernel.gamma(rule.nodes[i]);
        ax.integral += rule.weights[i] * g;
        l1_ref += rule.weights[i] * std::abs(g);
    }
    // ||Gamma_s||_L1 = ||Gamma||_L1 for every s by substitution
    ax.l1_mass = l1_ref;

    // int_{|x| > rho} |Gamma_s| = int_{|u| > rho/s} |Gamma(u)| du
    for (Scalar s : {Scalar(0.5), Scalar(0.25), Scalar(0.1), Scalar(0.02)}) {
        Scalar tail = 0;
        const Scalar cut = rho / s;
        for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
            if (std::abs(rule.nodes[i]) > cut) tail += rule.weights[i] * std::abs(kernel.gamma(rule.nodes[i]));
        ax.tail_mass = tail; // widths shrink monotonically; keep the last
    }
    return ax;
}

} // namespace uot::neural
