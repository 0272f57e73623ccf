#include "pipeline.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

namespace uot::app {

namespace fs = std::filesystem;
using io::json;

void RunConfig::validate() const {
    if (spec_path.empty()) throw SpecError("config: spec path is required");
    if (!fs::exists(spec_path)) throw SpecError("config: spec file does not exist: " + spec_path);
    if (iters < 1) throw SpecError("config: iters must be >= 1");
    if (!(eps0 > 0) || !(eps1 > 0)) throw SpecError("config: tolerances must be positive");
    if (!(horizon > 0)) throw SpecError("config: horizon must be positive");
    if (stamps < 3) throw SpecError("config: need at least 3 time stamps");
    if (compile_stamps < 2) throw SpecError("config: need at least 2 compile stamps");
    if (!external_ma_path.empty() && !fs::exists(external_ma_path))
        throw SpecError("config: external MA map file does not exist: " + external_ma_path);
}

namespace {

std::vector<double> uniform_times(double T, int count) {
    std::vector<double> t;
    t.reserve(size_t(count));
    for (int i = 0; i < count; ++i) t.push_back(T * double(i) / double(count - 1));
    return t;
}

std::string iterations_csv(const RunResult<double>& result) {
    std::ostringstream out;
    out << "n,gap,kkt_res,step_norm,certificate\n";
    for (const auto& row : result.diagnostics)
        out << row.n << "," << io::format_double(row.gap) << "," << io::format_double(row.kkt_res) << ","
            << io::format_double(row.step_norm) << "," << io::format_double(row.certificate) << "\n";
    return out.str();
}

// finite-difference Lipschitz estimate restricted to cells where both
// neighbors carry field support
double fd_lipschitz(const Grid<double>& g, const Vec<double>& v, const Vec<double>& mask) {
    double worst = 0;
    const double h = g.axes[0].step();
    for (Eigen::Index i = 0; i + 1 < v.size(); ++i)
        if (mask[i] > 0.5 && mask[i + 1] > 0.5) worst = std::max(worst, std::abs(v[i + 1] - v[i]) / h);
    return worst;
}

} // namespace

SolveArtifacts run_solve(const RunConfig& config) {
    SolveArtifacts art;
    art.spec = io::load_problem_spec(config.spec_path);
    art.params = compute_params(art.spec);
    art.params.L_max = config.iters;
    art.params.tol = config.tol_gap;
    art.params.paper_literal_bound = config.paper_literal_bound;
    art.result = run(art.spec, art.params, config.iters);
    const auto& last = art.result.diagnostics.back();
    art.gap_threshold = (config.tol_gap > 0 ? config.tol_gap : 1e-8) * (1.0 + std::abs(last.primal));
    art.converged = last.gap <= art.gap_threshold;
    return art;
}

DynamicsArtifacts run_dynamics(const RunConfig& config, const SolveArtifacts& solve) {
    DynamicsArtifacts dyn;
    const auto& spec = solve.spec;

    // smooth the potentials until the L2 budget eps0 holds
    double vs1 = 0, vs2 = 0;
    auto m1 = neural::mollify_to_tolerance(spec.f.grid, solve.result.duals.k1, config.eps0, &vs1);
    auto m2 = neural::mollify_to_tolerance(spec.g.grid, solve.result.duals.k2, config.eps0, &vs2);
    dyn.duals = solve.result.duals;
    dyn.duals.k1_tilde = m1.values;
    dyn.duals.k2_tilde = m2.values;
    dyn.duals.varsigma0 = std::max(vs1, vs2);
    dyn.varsigma0 = dyn.duals.varsigma0;
    dyn.moll_under_resolved = m1.under_resolved || m2.under_resolved;

    // kbar = max{delta, k1~ + k2~ - C} and the endpoint densities
    DualPotentials<double> tilded{spec.f.grid, spec.g.grid, dyn.duals.smoothed1(), dyn.duals.smoothed2(), {}, {}, 0.0};
    dyn.coupling = kkt_recover_coupling(tilded, spec);
    auto [fbar, gbar] = build_endpoint_densities(dyn.coupling, dyn.duals);
    dyn.fbar = std::move(fbar);
    dyn.gbar = std::move(gbar);

    // optimal map between the coupling marginals
    if (!config.external_ma_path.empty()) {
        dyn.map = io::map_from_json(io::read_json(config.external_ma_path));
        if (dyn.map.dimension() != spec.f.grid.dimension())
            throw SpecError("external MA map dimension does not match the problem");
    } else if (spec.f.grid.dimension() == 1) {
        dyn.map = solve_1d(spec.f.grid.axes[0], dyn.coupling.kx, spec.g.grid.axes[0], dyn.coupling.ky);
    } else if (config.tensor_ma) {
        throw Unsupported("tensor MA for d >= 2 requires separable marginals supplied through the library API");
    } else {
        throw Unsupported("d >= 2 solves need --tensor-ma or an external MA map file");
    }
    dyn.ma_report = ma_residual(dyn.map, spec.f.grid, dyn.coupling.kx, spec.g.grid, dyn.coupling.ky);

    dyn.fields.horizon = config.horizon;
    dyn.fields.map = dyn.map;
    dyn.fields.grid_f = spec.f.grid;
    dyn.fields.grid_g = spec.g.grid;
    dyn.fields.k1_tilde = dyn.duals.smoothed1();
    dyn.fields.k2_tilde = dyn.duals.smoothed2();

    dyn.stamp_times = uniform_times(config.horizon, config.stamps);
    dyn.evolved = evolve(dyn.fields, dyn.fbar, dyn.stamp_times);
    return dyn;
}

CompileArtifacts run_compile(const RunConfig& config, const DynamicsArtifacts& dyn) {
    if (dyn.fields.grid_f.dimension() != 1)
        throw Unsupported("the neural compile stage is implemented for d = 1");
    CompileArtifacts comp;
    const auto& ax = dyn.fields.grid_f.axes[0];
    const auto& am = dyn.map.axes[0];
    const double lo = std::min(ax.lo, am.apply(ax.lo));
    const double hi = std::max(ax.hi, am.apply(ax.hi));
    const Eigen::Index nbox = std::max<Eigen::Index>(96, 2 * ax.n);
    comp.support = Grid<double>(lo, hi, nbox);
    comp.compile_times = uniform_times(config.horizon, config.compile_stamps);

    Vec<double> stamps(config.compile_stamps);
    std::vector<Mat<double>> samples;
    double lip_xi = 0, lip_zeta = 0;
    for (int s = 0; s < config.compile_stamps; ++s) {
        const double t = comp.compile_times[size_t(s)];
        stamps[s] = t;
        Mat<double> m(nbox, 1);
        Vec<double> mask(nbox), zeta(nbox);
        for (Eigen::Index i = 0; i < nbox; ++i) {
            const Vec<double> x = comp.support.center(i);
            try {
                m(i, 0) = velocity(dyn.fields, x, t)[0];
                zeta[i] = growth(dyn.fields, x, t);
                mask[i] = 1.0;
            } catch (const OutOfRange&) {
                m(i, 0) = 0.0;
                zeta[i] = 0.0;
                mask[i] = 0.0;
            }
        }
        lip_xi = std::max(lip_xi, fd_lipschitz(comp.support, Vec<double>(m.col(0)), mask));
        lip_zeta = std::max(lip_zeta, fd_lipschitz(comp.support, zeta, mask));
        samples.push_back(std::move(m));
    }
    const double E = std::max(dyn.fbar.sup(), dyn.gbar.sup());
    const double k1sup = dyn.duals.k1.lpNorm<Eigen::Infinity>();
    const double k2sup = dyn.duals.k2.lpNorm<Eigen::Infinity>();
    const double vol = std::max(dyn.fields.grid_f.volume(), dyn.fields.grid_g.volume());
    const double third = 1.0 + dyn.coupling.delta * vol * (k1sup + k2sup) / (2.0 * E);
    comp.lipschitz = std::max({lip_xi, lip_zeta, third});
    comp.min_det_hess = dyn.map.axes[0].dT.minCoeff();

    neural::CompileOptions opts;
    opts.eps1 = config.eps1;
    opts.activation = neural::activation_from_name(config.activation);
    opts.horizon = config.horizon;
    opts.lipschitz_hint = comp.lipschitz;
    opts.min_det_hess = comp.min_det_hess;
    opts.domain_max_norm = std::max(std::abs(ax.lo), std::abs(ax.hi));
    comp.compiled = neural::compile_field(comp.support, samples, stamps, opts);
    return comp;
}

NeuralEvolution evolve_neural(const RunConfig& config, const DynamicsArtifacts& dyn, const CompileArtifacts& comp) {
    NeuralEvolution out;
    out.times = dyn.stamp_times;
    const auto& grid = dyn.fields.grid_f;
    const Eigen::Index N = grid.size();
    const int steps_per_stamp = std::max(1, config.flow_steps / std::max(1, int(out.times.size()) - 1));

    // growth along a neural trajectory; queries that drift marginally out of
    // the transported support are clamped back to its edge
    auto safe_growth = [&](double x, double t) {
        const auto& am = dyn.map.axes[0];
        const double lo = interp_axis_forward(am, t, dyn.fields.horizon, am.source.lo);
        const double hi = interp_axis_forward(am, t, dyn.fields.horizon, am.source.hi);
        Vec<double> p(1);
        p[0] = std::clamp(x, lo, hi);
        return growth(dyn.fields, p, t);
    };

    std::vector<Vec<double>> pos(out.times.size(), Vec<double>(N));
    std::vector<Vec<double>> wgt(out.times.size(), Vec<double>(N));
    const double volc = grid.cell_volume();
    for (Eigen::Index i = 0; i < N; ++i) {
        Vec<double> x = grid.center(i);
        double log_mass = 0;
        pos[0][i] = x[0];
        wgt[0][i] = dyn.fbar.values[i] * volc;
        for (size_t s = 0; s + 1 < out.times.size(); ++s) {
            const double t0 = out.times[s];
            const double t1 = out.times[s + 1];
            const double dt = (t1 - t0) / steps_per_stamp;
            for (int k = 0; k < steps_per_stamp; ++k) {
                const double t = t0 + k * dt;
                const Vec<double> k1 = comp.compiled.params.eval(x, t);
                const Vec<double> k2 = comp.compiled.params.eval(Vec<double>(x + 0.5 * dt * k1), t + 0.5 * dt);
                const Vec<double> k3 = comp.compiled.params.eval(Vec<double>(x + 0.5 * dt * k2), t + 0.5 * dt);
                const Vec<double> k4 = comp.compiled.params.eval(Vec<double>(x + dt * k3), t + dt);
                const double z0 = safe_growth(x[0], t);
                x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                const double z1 = safe_growth(x[0], t + dt);
                log_mass += 0.5 * dt * (z0 + z1);
            }
            pos[s + 1][i] = x[0];
            wgt[s + 1][i] = dyn.fbar.values[i] * std::exp(log_mass) * volc;
        }
    }
    out.positions = std::move(pos);
    out.weights = std::move(wgt);
    for (size_t s = 0; s < out.times.size(); ++s) out.masses.push_back(out.weights[s].sum());
    return out;
}

std::vector<MetricsRow> run_metrics(const RunConfig& config, const DynamicsArtifacts& dyn,
                                    const NeuralEvolution& neural_ev) {
    (void)config;
    std::vector<MetricsRow> rows;
    const auto stamp_index = [&](double t) {
        size_t best = 0;
        for (size_t s = 0; s < dyn.stamp_times.size(); ++s)
            if (std::abs(dyn.stamp_times[s] - t) < std::abs(dyn.stamp_times[best] - t)) best = s;
        return best;
    };
    for (double frac : {0.0, 0.5, 1.0}) {
        const double t = frac * dyn.fields.horizon;
        const size_t s = stamp_index(t);
        DiscreteMeasure<double> mu_neural;
        mu_neural.points = neural_ev.positions[s];
        mu_neural.weights = neural_ev.weights[s];
        DiscreteMeasure<double> mu_proxy;
        mu_proxy.points = Vec<double>(dyn.evolved.axis_positions[s][0]);
        mu_proxy.weights = dyn.evolved.weights[s];
        auto res = dbl_distance(mu_neural, mu_proxy);
        rows.push_back({t, res.distance, res.exact});
    }
    return rows;
}

namespace {

void write_solve_outputs(const RunConfig& config, const SolveArtifacts& art) {
    fs::create_directories(config.out_dir);
    const auto& spec = art.spec;
    io::write_json(config.out_dir + "/potential_1.json",
                   io::grid_function_to_json(spec.f.grid, art.result.duals.k1));
    io::write_json(config.out_dir + "/potential_2.json",
                   io::grid_function_to_json(spec.g.grid, art.result.duals.k2));
    io::write_json(config.out_dir + "/coupling.json", io::coupling_to_json(art.result.coupling));
    io::write_text(config.out_dir + "/iterations.csv", iterations_csv(art.result));

    const auto& last = art.result.diagnostics.back();
    json rep;
    rep["params"] = {{"alpha", art.params.alpha}, {"q", art.params.q}, {"s", art.params.s}, {"r", art.params.r},
                     {"delta", art.params.delta}};
    rep["iterations"] = art.result.executed;
    rep["primal"] = last.primal;
    rep["dual"] = last.dual;
    rep["gap"] = last.gap;
    rep["kkt_residual"] = last.kkt_res;
    rep["certificate"] = last.certificate;
    rep["converged"] = art.converged;
    rep["gap_threshold"] = art.gap_threshold;
    rep["non_monotone_gap_warning"] = art.result.non_monotone_gap;
    rep["early_stopped"] = art.result.early_stopped;
    io::write_json(config.out_dir + "/solve_report.json", rep);
}

void write_dynamics_outputs(const RunConfig& config, const DynamicsArtifacts& dyn) {
    fs::create_directories(config.out_dir);
    io::write_json(config.out_dir + "/fbar.json", io::density_to_json(dyn.fbar));
    io::write_json(config.out_dir + "/gbar.json", io::density_to_json(dyn.gbar));
    io::write_json(config.out_dir + "/map.json", io::map_to_json(dyn.map));

    std::ostringstream traj;
    traj << "t,x,mu,mass_factor\n";
    const auto& grid = dyn.fields.grid_f;
    for (size_t s = 0; s < dyn.stamp_times.size(); ++s) {
        const double t = dyn.stamp_times[s];
        for (Eigen::Index i = 0; i < grid.size(); ++i) {
            const double factor =
                detail::mass_factor_from_label(dyn.fields, grid.center(i), t);
            traj << io::format_double(t) << "," << io::format_double(dyn.evolved.positions[s](i, 0)) << ","
                 << io::format_double(dyn.evolved.values[s][i]) << "," << io::format_double(factor) << "\n";
        }
    }
    io::write_text(config.out_dir + "/trajectories.csv", traj.str());

    // Eulerian snapshots at t = 0, T/2, T in the density file format
    if (grid.dimension() == 1) {
        const auto& am = dyn.map.axes[0];
        for (size_t s : {size_t(0), dyn.stamp_times.size() / 2, dyn.stamp_times.size() - 1}) {
            const double t = dyn.stamp_times[s];
            const double lo = interp_axis_forward(am, t, dyn.fields.horizon, am.source.lo);
            const double hi = interp_axis_forward(am, t, dyn.fields.horizon, am.source.hi);
            Grid<double> target(lo, hi, grid.axes[0].n);
            Vec<double> vals = eulerian_resample(dyn.evolved, s, target);
            io::write_json(config.out_dir + "/snapshot_" + std::to_string(s) + ".json",
                           io::grid_function_to_json(target, vals));
        }
    }

    json rep;
    rep["varsigma0"] = dyn.varsigma0;
    rep["moll_under_resolved"] = dyn.moll_under_resolved;
    rep["ma_residual_sup"] = dyn.ma_report.sup;
    rep["ma_residual_l1"] = dyn.ma_report.l1;
    rep["mass_f"] = dyn.fbar.mass();
    rep["mass_g"] = dyn.gbar.mass();
    rep["mass_initial"] = dyn.evolved.masses.front();
    rep["mass_final"] = dyn.evolved.masses.back();
    io::write_json(config.out_dir + "/dynamics_report.json", rep);
}

void write_compile_outputs(const RunConfig& config, const CompileArtifacts& comp) {
    fs::create_directories(config.out_dir);
    io::write_json(config.out_dir + "/neural_params.json", io::neural_params_to_json(comp.compiled.params));
    const auto& r = comp.compiled.report;
    json rep;
    rep["l2_error"] = r.l2;
    rep["linf_error"] = r.linf;
    rep["stage_mollify"] = r.stage_mollify;
    rep["stage_truncate"] = r.stage_truncate;
    rep["stage_quadratize"] = r.stage_quadratize;
    rep["budget"] = r.budget;
    rep["eps_prime"] = r.eps_prime;
    rep["met_budget"] = r.met_budget;
    rep["N"] = comp.compiled.params.N();
    rep["M"] = comp.compiled.params.box_bound;
    rep["nbold"] = comp.compiled.params.nbold;
    rep["cap"] = comp.compiled.params.cap;
    rep["l_partition"] = comp.compiled.params.l_partition;
    rep["varsigma"] = comp.compiled.params.varsigma;
    rep["moll_width"] = comp.compiled.params.moll_width;
    rep["lipschitz"] = comp.lipschitz;
    rep["min_det_hess"] = comp.min_det_hess;
    io::write_json(config.out_dir + "/compile_report.json", rep);
}

} // namespace

int cmd_solve(const RunConfig& config) {
    config.validate();
    auto art = run_solve(config);
    write_solve_outputs(config, art);
    return art.converged ? 0 : 3;
}

int cmd_dynamics(const RunConfig& config) {
    config.validate();
    auto art = run_solve(config);
    write_solve_outputs(config, art);
    auto dyn = run_dynamics(config, art);
    write_dynamics_outputs(config, dyn);
    return 0;
}

int cmd_compile(const RunConfig& config) {
    config.validate();
    auto art = run_solve(config);
    write_solve_outputs(config, art);
    auto dyn = run_dynamics(config, art);
    write_dynamics_outputs(config, dyn);
    auto comp = run_compile(config, dyn);
    write_compile_outputs(config, comp);
    return 0;
}

int cmd_metrics(const std::string& file_a, const std::string& file_b, const std::string& out_path) {
    auto [ga, va] = io::grid_function_from_json(io::read_json(file_a));
    auto [gb, vb] = io::grid_function_from_json(io::read_json(file_b));
    GridDensity<double> da(ga, va.cwiseMax(1e-300), 1e-300);
    GridDensity<double> db(gb, vb.cwiseMax(1e-300), 1e-300);
    auto res = dbl_distance(DiscreteMeasure<double>::from_density(da), DiscreteMeasure<double>::from_density(db));
    json rep;
    rep["dbl"] = res.distance;
    rep["exact"] = res.exact;
    rep["witness_sup"] = res.witness_sup;
    rep["witness_lip"] = res.witness_lip;
    if (out_path.empty())
        std::cout << rep.dump(1) << "\n";
    else
        io::write_json(out_path, rep);
    return 0;
}

int cmd_pipeline(const RunConfig& config) {
    config.validate();
    auto art = run_solve(config);
    write_solve_outputs(config, art);
    auto dyn = run_dynamics(config, art);
    write_dynamics_outputs(config, dyn);
    auto comp = run_compile(config, dyn);
    write_compile_outputs(config, comp);
    auto neural_ev = evolve_neural(config, dyn, comp);
    auto metrics = run_metrics(config, dyn, neural_ev);

    json rep;
    rep["solve"] = io::read_json(config.out_dir + "/solve_report.json");
    rep["dynamics"] = io::read_json(config.out_dir + "/dynamics_report.json");
    rep["compile"] = io::read_json(config.out_dir + "/compile_report.json");
    json table = json::array();
    for (const auto& row : metrics)
        table.push_back({{"t", row.t}, {"dbl", row.dbl}, {"exact", row.exact}});
    rep["dbl_neural_vs_proxy"] = table;
    rep["neural_mass_final"] = neural_ev.masses.back();
    io::write_json(config.out_dir + "/report.json", rep);

    // tidy plot data: one observation per row
    std::ostringstream plot;
    plot << "stage,quantity,key,value\n";
    for (const auto& row : art.result.diagnostics) {
        plot << "solve,gap," << row.n << "," << io::format_double(row.gap) << "\n";
        plot << "solve,step_norm," << row.n << "," << io::format_double(row.step_norm) << "\n";
        plot << "solve,certificate," << row.n << "," << io::format_double(row.certificate) << "\n";
    }
    for (size_t s = 0; s < dyn.stamp_times.size(); ++s)
        plot << "dynamics,mass," << io::format_double(dyn.stamp_times[s]) << ","
             << io::format_double(dyn.evolved.masses[s]) << "\n";
    for (const auto& row : metrics)
        plot << "metrics,dbl," << io::format_double(row.t) << "," << io::format_double(row.dbl) << "\n";
    io::write_text(config.out_dir + "/plot_data.csv", plot.str());
    return 0;
}

} // namespace uot::app
