#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uot/neural/hermite.hpp"
#include "uot/neural/mollify.hpp"
#include "uot/neural/nai.hpp"
#include "uot/neural/ridge.hpp"

namespace uot::neural {

// One network unit: a diagonal time-dependent gain W(t) applied to the
// scalar feature sigma(a (x.v) + offset). The full parameter matrices are
// [A]_{j,j'} = a v_{j'} (identical rows) and [b]_j = offset, stored here in
// factored form; the exporter expands them.
template <typename Scalar>
struct NeuralUnit {
    Mat<Scalar> W_diag;    // d x stamps
    Vec<Scalar> direction; // ridge direction v
    Scalar a_scale{1};     // A'_i / varsigma
    Scalar offset{0};      // b'_i - A'_i w_l / varsigma
};

template <typename Scalar>
struct NeuralFieldParams {
    int dimension{1};
    NaiKernel<Scalar> kernel;
    Scalar box_bound{1}; // M
    Scalar varsigma{1};  // quadratization width
    Scalar moll_width{0};
    int nbold{1};
    int cap{1};          // component cap of the Hermite index set
    long l_partition{1}; // uniform partition cells per ridge degree
    Scalar partition_lo{0}, partition_hi{0};
    Vec<Scalar> stamps;
    bool piecewise_constant_W{false};
    std::vector<NeuralUnit<Scalar>> units;

    long N() const { return long(units.size()); }

    // N = N' sum_{indices} sum_{m <= |n|} N_m l_m for the uniform partition
    long expected_unit_count() const {
        long acc = 0;
        for (const auto& idx : multi_indices(dimension, cap)) {
            const int total = index_sum(idx);
            for (int m = 0; m <= total; ++m) acc += ridge_count(m, dimension) * l_partition;
        }
        return acc * kernel.units();
    }

    std::pair<Eigen::Index, Scalar> stamp_bracket(Scalar t) const {
        const Eigen::Index S = stamps.size();
        if (S <= 1) return {0, Scalar(0)};
        Eigen::Index s = 0;
        while (s + 2 < S && t > stamps[s + 1]) ++s;
        const Scalar span = stamps[s + 1] - stamps[s];
        Scalar lam = span > Scalar(0) ? (t - stamps[s]) / span : Scalar(0);
        lam = std::clamp(lam, Scalar(0), Scalar(1));
        if (piecewise_constant_W) lam = Scalar(0);
        return {s, lam};
    }

    Vec<Scalar> eval(const Vec<Scalar>& x, Scalar t) const {
        for (int a = 0; a < dimension; ++a)
            if (std::abs(x[a]) > box_bound * (Scalar(1) + Scalar(1e-12)))
                throw OutOfBox("eval_network: point outside [-M, M]^d");
        const auto [s, lam] = stamp_bracket(t);
        Vec<Scalar> out = Vec<Scalar>::Zero(dimension);
        for (const auto& u : units) {
            const Scalar arg = u.a_scale * u.direction.dot(x) + u.offset;
            const Scalar act =
                kernel.sigma ? kernel.sigma(arg) : sigma_eval(kernel.activation, arg);
            if (act == Scalar(0)) continue;
            if (stamps.size() <= 1 || lam == Scalar(0))
                out += act * u.W_diag.col(s);
            else
                out += act * ((Scalar(1) - lam) * u.W_diag.col(s) + lam * u.W_diag.col(s + 1));
        }
        return out;
    }
};

template <typename Scalar>
Vec<Scalar> eval_network(const NeuralFieldParams<Scalar>& params, const Vec<Scalar>& x, Scalar t) {
    return params.eval(x, t);
}

// Quadratized ridge monomial  (x.v)^m  ~  sum_l dz w_l^m Gamma_vs(s - w_l),
// evaluated at feature values s; shared by assembly and the in-sweep error
// probes.
template <typename Scalar>
struct PartitionSpec {
    Scalar lo{0}, hi{0};
    long cells{1};
    Scalar node(long l) const { return lo + (Scalar(l) + Scalar(0.5)) * (hi - lo) / Scalar(cells); }
    Scalar width() const { return (hi - lo) / Scalar(cells); }
};

// Builds the (W(t), A, b) triplets, one unit per (Hermite index, ridge
// degree, direction, kernel unit, partition cell). Coefficients arrive in
// the orthonormal Hermite convention; the norm constant is divided out
// here when the unnormalized ridge expansion is substituted.
template <typename Scalar>
NeuralFieldParams<Scalar> assemble(const std::vector<HermiteExpansion<Scalar>>& per_stamp, const Vec<Scalar>& stamps,
                                   const NaiKernel<Scalar>& kernel, Scalar varsigma, const PartitionSpec<Scalar>& part,
                                   Scalar box_bound) {
    if (per_stamp.empty()) throw InvalidParameter("assemble: need at least one time stamp");
    const auto& ref = per_stamp.front();
    const int d = ref.dimension;
    const Eigen::Index S = stamps.size();
    if (Eigen::Index(per_stamp.size()) != S) throw InvalidParameter("assemble: stamps/expansions mismatch");

    NeuralFieldParams<Scalar> params;
    params.dimension = d;
    params.kernel = kernel;
    params.box_bound = box_bound;
    params.varsigma = varsigma;
    params.nbold = ref.nbold;
    params.cap = ref.cap;
    params.l_partition = part.cells;
    params.partition_lo = part.lo;
    params.partition_hi = part.hi;
    params.stamps = stamps;

    const Scalar dz = part.width();
    for (size_t i = 0; i < ref.index.size(); ++i) {
        const auto& idx = ref.index[i];
        const Scalar fejer = ref.fejer[Eigen::Index(i)];
        const Scalar norm = hermite_norm_constant<Scalar>(idx);
        auto expr = express<Scalar>(idx, d);
        for (int m = 0; m <= index_sum(idx); ++m) {
            auto basis = ridge_decompose<Scalar>(m, d);
            const auto& h = expr.h[size_t(m)];
            for (size_t j = 0; j < basis.directions.size(); ++j) {
                for (long l = 0; l < part.cells; ++l) {
                    const Scalar wl = part.node(l);
                    Scalar wpow = 1;
                    for (int k = 0; k < m; ++k) wpow *= wl;
                    const Scalar geom = fejer * h[Eigen::Index(j)] * dz * wpow / (varsigma * norm);
                    for (int ku = 0; ku < kernel.units(); ++ku) {
                        NeuralUnit<Scalar> unit;
                        unit.direction = basis.directions[j];
                        unit.a_scale = kernel.A[ku] / varsigma;
                        unit.offset = kernel.b[ku] - kernel.A[ku] * wl / varsigma;
                        unit.W_diag.resize(d, S);
                        for (Eigen::Index s = 0; s < S; ++s)
                            unit.W_diag.col(s) = geom * kernel.W[ku] * per_stamp[size_t(s)].coeffs.row(Eigen::Index(i)).transpose();
                        params.units.push_back(std::move(unit));
                    }
                }
            }
        }
    }
    if (params.N() != params.expected_unit_count())
        throw InternalError("assemble: unit count does not match the counting formula");
    return params;
}

template <typename Scalar>
struct FieldErrorReport {
    Scalar l2{0};   // worst over stamps
    Scalar linf{0}; // worst over stamps
    std::vector<Scalar> l2_per_stamp;
    Scalar stage_mollify{0};
    Scalar stage_truncate{0};
    Scalar stage_quadratize{0};
    Scalar budget{0};       // requested eps1
    Scalar eps_prime{0};    // internal rescaled budget
    bool met_budget{false};
};

// L2/Linf distance between the compiled field and a reference field over a
// region grid, worst case over the sampled stamps.
template <typename Scalar>
FieldErrorReport<Scalar> field_error(const NeuralFieldParams<Scalar>& params,
                                     const std::function<Vec<Scalar>(const Vec<Scalar>&, Scalar)>& reference,
                                     const Grid<Scalar>& region) {
    FieldErrorReport<Scalar> rep;
    for (Eigen::Index s = 0; s < params.stamps.size(); ++s) {
        const Scalar t = params.stamps[s];
        Scalar acc = 0, sup = 0;
        for (Eigen::Index i = 0; i < region.size(); ++i) {
            const Vec<Scalar> x = region.center(i);
            const Vec<Scalar> diff = params.eval(x, t) - reference(x, t);
            const Scalar n2 = diff.squaredNorm();
            acc += n2;
            sup = std::max(sup, std::sqrt(n2));
        }
        const Scalar l2 = std::sqrt(acc * region.cell_volume());
        rep.l2_per_stamp.push_back(l2);
        rep.l2 = std::max(rep.l2, l2);
        rep.linf = std::max(rep.linf, sup);
    }
    return rep;
}

// RK4 flow of the compiled field; throws BoxExit when a trajectory leaves
// [-M, M]^d.
template <typename Scalar>
struct Trajectory {
    Vec<Scalar> times;
    Mat<Scalar> states; // (steps+1) x d
};

template <typename Scalar>
Trajectory<Scalar> neural_ode_flow(const NeuralFieldParams<Scalar>& params, const Vec<Scalar>& x0, Scalar T,
                                   int steps) {
    Trajectory<Scalar> traj;
    traj.times.resize(steps + 1);
    traj.states.resize(steps + 1, params.dimension);
    Vec<Scalar> x = x0;
    const Scalar dt = T / Scalar(steps);
    traj.times[0] = 0;
    traj.states.row(0) = x.transpose();
    for (int k = 0; k < steps; ++k) {
        const Scalar t = Scalar(k) * dt;
        try {
            const Vec<Scalar> k1 = params.eval(x, t);
            const Vec<Scalar> k2 = params.eval(Vec<Scalar>(x + Scalar(0.5) * dt * k1), t + Scalar(0.5) * dt);
            const Vec<Scalar> k3 = params.eval(Vec<Scalar>(x + Scalar(0.5) * dt * k2), t + Scalar(0.5) * dt);
            const Vec<Scalar> k4 = params.eval(Vec<Scalar>(x + dt * k3), t + dt);
            x += dt / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
        } catch (const OutOfBox&) {
            throw BoxExit("neural_ode_flow: trajectory left the box", double(t));
        }
        for (int a = 0; a < params.dimension; ++a)
            if (std::abs(x[a]) > params.box_bound) throw BoxExit("neural_ode_flow: trajectory left the box", double(t + dt));
        traj.times[k + 1] = t + dt;
        traj.states.row(k + 1) = x.transpose();
    }
    return traj;
}

struct CompileOptions {
    double eps1{0.1};
    Activation activation{Activation::relu};
    double horizon{1};
    double lipschitz_hint{1};
    double min_det_hess{1};
    double box_margin{1};
    double domain_max_norm{-1}; // max |x| over the initial domain; < 0 uses the support box
    int nbold_max{6};
    long l_max{3000};
    Eigen::Index eval_points{512};
    bool piecewise_constant_W{false};
    bool throw_on_miss{true};
};

template <typename Scalar>
struct CompileResult {
    NeuralFieldParams<Scalar> params;
    FieldErrorReport<Scalar> report;
};

// End-to-end compilation of sampled field stamps into network parameters.
// The mollifier width and Hermite degree are searched jointly (they trade
// off: a narrower kernel lowers the smoothing error but sharpens the
// boundary layer the polynomial stage must chase), steered by the eps'_1/3
// sub-budgets; the partition stage refines until its sub-budget holds; the
// measured total error against the requested eps1 is the accept/reject
// gate.
template <typename Scalar>
CompileResult<Scalar> compile_field(const Grid<Scalar>& support, const std::vector<Mat<Scalar>>& samples,
                                    const Vec<Scalar>& stamps, const CompileOptions& opts) {
    if (samples.empty() || Eigen::Index(samples.size()) != stamps.size())
        throw InvalidParameter("compile_field: need one sample matrix per stamp");
    const int d = support.dimension();
    if (d != 1) throw Unsupported("compile_field: the budgeted search is implemented for d = 1");
    const Eigen::Index S = stamps.size();
    const Eigen::Index N = support.size();
    for (const auto& m : samples)
        if (m.rows() != N || m.cols() != d) throw GridMismatch("compile_field: sample shape mismatch");

    // box bound M: max |x| + T (eps' + sup |field|) + margin, rounded up to 0.5
    Scalar sup_field = 0;
    for (const auto& m : samples) sup_field = std::max(sup_field, m.template lpNorm<Eigen::Infinity>());
    const Scalar max_x = opts.domain_max_norm >= 0
                             ? Scalar(opts.domain_max_norm)
                             : std::max(std::abs(support.axes[0].lo), std::abs(support.axes[0].hi));
    const Scalar L = Scalar(opts.lipschitz_hint);
    const Scalar eps_prime = Scalar(opts.eps1) * std::min(Scalar(1), Scalar(opts.min_det_hess)) /
                             (std::exp(L) * (std::exp(Scalar(opts.horizon) * L) - Scalar(1)));
    const Scalar M =
        std::ceil(Scalar(2) * (max_x + Scalar(opts.horizon) * (eps_prime + sup_field) + Scalar(opts.box_margin))) /
        Scalar(2);
    const Scalar budget = eps_prime / Scalar(3);

    Grid<Scalar> region(-M, M, opts.eval_points);

    // zero-extended reference from the raw samples
    auto raw_at = [&](const Vec<Scalar>& x, Eigen::Index s) -> Vec<Scalar> {
        if (x[0] < support.axes[0].lo || x[0] > support.axes[0].hi) return Vec<Scalar>::Zero(d);
        Vec<Scalar> out(d);
        for (int c = 0; c < d; ++c) out[c] = uot::detail::interp_grid(support, Vec<Scalar>(samples[size_t(s)].col(c)), x);
        return out;
    };

    // cached per-stamp values on the evaluation grid
    auto cache_values = [&](const std::function<Scalar(const Vec<Scalar>&, Eigen::Index)>& fn) {
        Mat<Scalar> vals(region.size(), S);
        for (Eigen::Index s = 0; s < S; ++s)
            for (Eigen::Index i = 0; i < region.size(); ++i) vals(i, s) = fn(region.center(i), s);
        return vals;
    };
    auto l2_cached = [&](const Mat<Scalar>& a, const Mat<Scalar>& b) {
        Scalar worst = 0;
        for (Eigen::Index s = 0; s < S; ++s)
            worst = std::max(worst, std::sqrt(region.cell_volume() * (a.col(s) - b.col(s)).squaredNorm()));
        return worst;
    };
    const Mat<Scalar> raw_vals = cache_values([&](const Vec<Scalar>& x, Eigen::Index s) { return raw_at(x, s)[0]; });

    // ---- joint (moll width, Hermite degree) search
    const Scalar width = support.axes[0].length();
    const Scalar sigma_floor = support.axes[0].step() / Scalar(8);
    struct Stage12 {
        Scalar sigma{0};
        Scalar stage1{0}, stage2{0};
        std::vector<HermiteExpansion<Scalar>> exps;
        Mat<Scalar> herm_vals;
    };
    Stage12 best;
    Scalar best_bound = std::numeric_limits<Scalar>::infinity();
    for (Scalar sigma = width / Scalar(8); sigma > sigma_floor; sigma /= Scalar(2)) {
        std::vector<Mollifier<Scalar>> moll;
        moll.reserve(size_t(S));
        for (Eigen::Index s = 0; s < S; ++s)
            moll.emplace_back(support, Vec<Scalar>(samples[size_t(s)].col(0)), sigma);
        const Mat<Scalar> moll_vals =
            cache_values([&](const Vec<Scalar>& x, Eigen::Index s) { return moll[size_t(s)](x); });
        const Scalar stage1 = l2_cached(moll_vals, raw_vals);
        if (stage1 >= best_bound) continue; // already dominated

        Grid<Scalar> moll_support(support.axes[0].lo - sigma, support.axes[0].hi + sigma, N);
        const Scalar feature = std::max(sigma, support.axes[0].step());
        const int panels_hint = std::min(256, int(std::ceil(Scalar(1.5) * width / feature)));
        // the projection nodes repeat across the degree sweep; memoize the
        // mollified field per stamp
        std::vector<std::unordered_map<long long, Scalar>> memo(static_cast<size_t>(S));
        auto moll_cached = [&](Eigen::Index s, const Vec<Scalar>& x) {
            long long key;
            static_assert(sizeof(key) == sizeof(Scalar) || sizeof(Scalar) != 8);
            std::memcpy(&key, &x[0], sizeof(long long));
            auto& m = memo[size_t(s)];
            auto it = m.find(key);
            if (it != m.end()) return it->second;
            const Scalar v = moll[size_t(s)](x);
            m.emplace(key, v);
            return v;
        };
        Scalar prev_stage2 = std::numeric_limits<Scalar>::infinity();
        for (int nbold : {1, 2, 3, 4, 6}) {
            if (nbold > opts.nbold_max) break;
            const int cap = 2 * nbold - 1;
            std::vector<HermiteExpansion<Scalar>> exps;
            for (Eigen::Index s = 0; s < S; ++s) {
                auto field_fn = [&](const Vec<Scalar>& x) -> Vec<Scalar> {
                    Vec<Scalar> out(1);
                    out[0] = moll_cached(s, x);
                    return out;
                };
                exps.push_back(hermite_coeffs<Scalar>(field_fn, moll_support, nbold, cap, d, panels_hint));
            }
            const Mat<Scalar> herm_vals =
                cache_values([&](const Vec<Scalar>& x, Eigen::Index s) { return exps[size_t(s)].eval(x)[0]; });
            const Scalar stage2 = l2_cached(herm_vals, moll_vals);
            if (stage1 + stage2 < best_bound) {
                best_bound = stage1 + stage2;
                best = Stage12{sigma, stage1, stage2, std::move(exps), herm_vals};
            }
            if (stage2 <= budget) break;
            if (stage2 > prev_stage2 * Scalar(0.93)) break; // plateau on the boundary layer
            prev_stage2 = stage2;
        }
        if (best.stage1 <= budget && best.stage2 <= budget) break;
        if (best_bound <= Scalar(2) / Scalar(3) * Scalar(opts.eps1)) break;
        // once smoothing is no longer the binding stage, further halving
        // only re-runs the degree sweep against the same truncation floor
        if (best.stage1 <= Scalar(0.25) * std::max(budget, best.stage2)) break;
    }
    if (best.exps.empty()) throw Unresolved("compile_field: no admissible mollifier/degree pair found");

    // ---- stage 3: kernel width and partition refinement
    const NaiKernel<Scalar> kernel = nai_kernel<Scalar>(opts.activation);
    const Scalar reach = kernel.support_radius > Scalar(0) ? kernel.support_radius : Scalar(12);
    NeuralFieldParams<Scalar> best_params;
    Scalar stage3 = std::numeric_limits<Scalar>::infinity();
    for (Scalar vs : {Scalar(0.2), Scalar(0.1), Scalar(0.05)}) {
        PartitionSpec<Scalar> part;
        part.lo = -M - reach * vs;
        part.hi = M + reach * vs;
        part.cells = std::min<long>(opts.l_max, long(std::ceil((part.hi - part.lo) / (vs / Scalar(4)))));
        auto params = assemble(best.exps, stamps, kernel, vs, part, M);
        Mat<Scalar> net_vals(region.size(), S);
        for (Eigen::Index s = 0; s < S; ++s)
            for (Eigen::Index i = 0; i < region.size(); ++i)
                net_vals(i, s) = params.eval(region.center(i), stamps[s])[0];
        const Scalar err = l2_cached(net_vals, best.herm_vals);
        if (err < stage3) {
            stage3 = err;
            best_params = std::move(params);
            if (stage3 <= budget) break;
        }
    }
    best_params.moll_width = best.sigma;
    best_params.piecewise_constant_W = opts.piecewise_constant_W;
    const Scalar stage1 = best.stage1;
    const Scalar stage2 = best.stage2;
    const Scalar sigma = best.sigma;
    (void)sigma;

    // ---- total gate
    CompileResult<Scalar> result;
    auto reference = [&](const Vec<Scalar>& x, Scalar t) -> Vec<Scalar> {
        // nearest stamp: the reference samples are only defined per stamp
        Eigen::Index s = 0;
        for (Eigen::Index k = 0; k < S; ++k)
            if (std::abs(stamps[k] - t) < std::abs(stamps[s] - t)) s = k;
        return raw_at(x, s);
    };
    result.report = field_error<Scalar>(best_params, reference, region);
    result.report.stage_mollify = stage1;
    result.report.stage_truncate = stage2;
    result.report.stage_quadratize = stage3;
    result.report.budget = Scalar(opts.eps1);
    result.report.eps_prime = eps_prime;
    result.report.met_budget = result.report.l2 <= Scalar(opts.eps1);
    result.params = std::move(best_params);
    if (!result.report.met_budget && opts.throw_on_miss)
        throw Unresolved("compile_field: measured L2 error " + std::to_string(double(result.report.l2)) +
                         " exceeds the requested budget " + std::to_string(opts.eps1));
    return result;
}

} // namespace uot::neural
