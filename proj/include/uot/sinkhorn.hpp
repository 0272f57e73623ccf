#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "uot/core.hpp"

namespace uot {

template <typename Scalar>
struct SolverParams {
    Scalar alpha{0};
    Scalar q{0};
    Scalar s{0};
    Scalar r{0};
    Scalar delta{0};
    long L_max{300};
    Scalar tol{0}; // early-stop duality-gap tolerance; 0 disables

    // Step 2/5 upper bound: delta-scaled (dual feasible set) by default,
    // or the bound as printed in the algorithm listing.
    bool paper_literal_bound{false};
};

// alpha = sqrt(2 (max{|Of|,|Og|}^2 + (E - c/4)^2)), q = 2 sqrt(alpha/c),
// s = sqrt(alpha c)/2, r = q/(1+q).
template <typename Scalar>
SolverParams<Scalar> compute_params(const ProblemSpec<Scalar>& spec) {
    spec.validate();
    const Scalar c = spec.c();
    const Scalar E = spec.sup_bound();
    const Scalar vol = std::max(spec.volume_f(), spec.volume_g());
    if (spec.delta * vol > c * (Scalar(1) + Scalar(1e-12)))
        throw InvalidDelta("compute_params: delta * max{|Omega_f|,|Omega_g|} must not exceed c");
    SolverParams<Scalar> p;
    p.alpha = std::sqrt(Scalar(2) * (vol * vol + (E - c / Scalar(4)) * (E - c / Scalar(4))));
    p.q = Scalar(2) * std::sqrt(p.alpha / c);
    p.s = Scalar(0.5) * std::sqrt(p.alpha * c);
    p.r = p.q / (Scalar(1) + p.q);
    p.delta = spec.delta;
    return p;
}

// The six coupled sequences, all zero-initialized.
template <typename Scalar>
struct SolverState {
    Vec<Scalar> X, X0, Xs;
    Vec<Scalar> Y, Y0, Ys;
    long n{0};

    static SolverState zero(const ProblemSpec<Scalar>& spec) {
        SolverState s;
        s.X = Vec<Scalar>::Zero(spec.f.grid.size());
        s.X0 = s.X;
        s.Xs = s.X;
        s.Y = Vec<Scalar>::Zero(spec.g.grid.size());
        s.Y0 = s.Y;
        s.Ys = s.Y;
        return s;
    }
};

// One sweep of the six updates. Step 1/4 evaluates the gradient of
// G_w = G - (c/4) w at (X*, Y*); without the (c/4) term the fixed point
// solves min G + (c/4) w instead of the dual problem.
template <typename Scalar>
SolverState<Scalar> step(const SolverState<Scalar>& state, const ProblemSpec<Scalar>& spec,
                         const SolverParams<Scalar>& params) {
    if (state.X.size() != spec.f.grid.size() || state.Y.size() != spec.g.grid.size())
        throw GridMismatch("step: state grids do not match spec");
    const Scalar c = spec.c();
    const Scalar q = params.q, s = params.s, r = params.r;

    SolverState<Scalar> next;
    next.n = state.n + 1;

    auto [gx, gy] = Gw_gradients(state.Xs, state.Ys, spec);
    next.X = std::move(gx);
    next.Y = std::move(gy);

    const Scalar bound_scale = params.paper_literal_bound ? Scalar(1) : spec.delta;
    const Vec<Scalar> bx =
        (Scalar(1) - bound_scale * spec.volume_g() / spec.f.values.array()).matrix();
    const Vec<Scalar> by =
        (Scalar(1) - bound_scale * spec.volume_f() / spec.g.values.array()).matrix();

    next.X0 = ((s * state.X0 - ((Scalar(1) + r) * next.X - r * state.X)) / (c / Scalar(4) + s))
                  .cwiseMin(bx);
    next.Y0 = ((s * state.Y0 - ((Scalar(1) + r) * next.Y - r * state.Y)) / (c / Scalar(4) + s))
                  .cwiseMin(by);

    next.Xs = (q * state.Xs + next.X0) / (Scalar(1) + q);
    next.Ys = (q * state.Ys + next.Y0) / (Scalar(1) + q);

    if (!next.X.allFinite() || !next.X0.allFinite() || !next.Xs.allFinite() || !next.Y.allFinite() ||
        !next.Y0.allFinite() || !next.Ys.allFinite())
        throw NumericalBlowup("step: non-finite iterate", next.n);
    return next;
}

template <typename Scalar>
struct IterationRow {
    long n{0};          // iterates produced so far (X0^n)
    Scalar gap{0};      // |primal(k_rec) + dual|
    Scalar kkt_res{0};  // max marginal/coupling residual
    Scalar step_norm{0}; // ||X0^n - X0^{n-1}||_L2
    Scalar step_norm_y{0};
    Scalar primal{0};
    Scalar dual{0};
    Scalar certificate{0}; // B(n-1), filled by error_certificate
};

template <typename Scalar>
struct RunResult {
    DualPotentials<Scalar> duals;
    Coupling<Scalar> coupling;
    std::vector<IterationRow<Scalar>> diagnostics;
    SolverParams<Scalar> params;
    Scalar G_zero{0};     // G(0,0)
    Scalar G_hat{0};      // weak-duality lower bound on G at the optimum
    Scalar best_primal{0};
    bool non_monotone_gap{false};
    bool early_stopped{false};
    long executed{0}; // number of steps performed (L+1 unless early stop)
};

// Runs L+1 sweeps and returns (X0^{L+1}, Y0^{L+1}) with the KKT-recovered
// coupling and per-iteration diagnostics.
template <typename Scalar>
RunResult<Scalar> run(const ProblemSpec<Scalar>& spec, const SolverParams<Scalar>& params, long L) {
    if (L < 0) throw InvalidParameter("run: L must be >= 0");
    RunResult<Scalar> out;
    out.params = params;
    const Vec<Scalar> zf = Vec<Scalar>::Zero(spec.f.grid.size());
    const Vec<Scalar> zg = Vec<Scalar>::Zero(spec.g.grid.size());
    out.G_zero = G_eval(zf, zg, spec);

    SolverState<Scalar> state = SolverState<Scalar>::zero(spec);
    Scalar best_primal = std::numeric_limits<Scalar>::infinity();
    Scalar prev_gap = std::numeric_limits<Scalar>::infinity();
    for (long it = 0; it <= L; ++it) {
        SolverState<Scalar> next = step(state, spec, params);
        IterationRow<Scalar> row;
        row.n = next.n;
        row.step_norm = norm_l2(spec.f.grid, Vec<Scalar>(next.X0 - state.X0));
        row.step_norm_y = norm_l2(spec.g.grid, Vec<Scalar>(next.Y0 - state.Y0));

        DualPotentials<Scalar> duals{spec.f.grid, spec.g.grid, next.X0, next.Y0, {}, {}, Scalar(0)};
        Coupling<Scalar> rec = kkt_recover_coupling(duals, spec);
        row.primal = primal_objective(rec, spec);
        row.dual = dual_objective(duals, spec);
        row.gap = std::abs(row.primal + row.dual);
        KktResiduals<Scalar> res = kkt_residuals(rec, duals, spec);
        row.kkt_res = res.max_residual();
        best_primal = std::min(best_primal, row.primal);

        if (row.gap > prev_gap * (Scalar(1) + Scalar(1e-9)) + Scalar(1e-13)) out.non_monotone_gap = true;
        prev_gap = row.gap;
        out.diagnostics.push_back(row);
        state = std::move(next);

        if (params.tol > Scalar(0) && row.gap <= params.tol * (Scalar(1) + std::abs(row.primal))) {
            out.early_stopped = (it < L);
            break;
        }
    }
    out.executed = state.n;
    out.best_primal = best_primal;
    const Scalar half_masses = Scalar(0.5) * (spec.f.mass() + spec.g.mass());
    out.G_hat = -best_primal + half_masses; // dual value of the best feasible candidate, shifted to G scale

    out.duals = DualPotentials<Scalar>{spec.f.grid, spec.g.grid, state.X0, state.Y0, {}, {}, Scalar(0)};
    out.coupling = kkt_recover_coupling(out.duals, spec);

    // B(m) = (4 r^m / c) ( q (G(0,0) - Ghat) + s w(kbar1, kbar2) ), attached to row m+1
    const Scalar wbar = w_functional(spec.f.grid, spec.g.grid, state.X0, state.Y0);
    for (auto& row : out.diagnostics) {
        const Scalar m = Scalar(row.n - 1);
        row.certificate = (Scalar(4) * std::pow(params.r, m) / spec.c()) *
                          (params.q * (out.G_zero - out.G_hat) + params.s * wbar);
    }
    return out;
}

// Certified bound sequence B(m) for the executed iterations; pass
// use_trivial_bound to replace Ghat by G(0,0) (valid but looser when no
// feasible primal candidate exists).
template <typename Scalar>
std::vector<Scalar> error_certificate(const RunResult<Scalar>& result, const SolverParams<Scalar>& params,
                                      const ProblemSpec<Scalar>& spec, bool use_trivial_bound = false) {
    const Scalar Ghat = use_trivial_bound ? result.G_zero : result.G_hat;
    const Scalar wbar = w_functional(spec.f.grid, spec.g.grid, result.duals.k1, result.duals.k2);
    std::vector<Scalar> B;
    B.reserve(size_t(result.executed));
    for (long m = 0; m < result.executed; ++m) {
        B.push_back((Scalar(4) * std::pow(params.r, Scalar(m)) / spec.c()) *
                    (params.q * (result.G_zero - Ghat) + params.s * wbar));
    }
    return B;
}

} // namespace uot
