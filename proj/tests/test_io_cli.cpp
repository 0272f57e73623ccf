#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "uot/io.hpp"

using namespace uot;
using namespace uot::testing;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("uot_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

GridDensity<double> random_density(Eigen::Index n, unsigned seed) {
    std::mt19937 rng(seed);
    Grid<double> g(-0.25, 1.75, n);
    Vec<double> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 0.5 + std::abs(random_vec(1, rng)[0]) * 1.7;
    return GridDensity<double>(g, v, 0.5);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(UOT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("io: density JSON round trip is bit exact") {
    auto rho = random_density(37, 11);
    auto j = io::density_to_json(rho);
    const std::string text = j.dump();
    auto back = io::density_from_json(io::json::parse(text));
    CHECK(back.grid == rho.grid);
    REQUIRE(back.values.size() == rho.values.size());
    for (Eigen::Index i = 0; i < rho.values.size(); ++i) CHECK(back.values[i] == rho.values[i]);
    CHECK(back.c_lower == rho.c_lower);
}

TEST_CASE("io: density CSV round trip is bit exact") {
    auto rho = random_density(29, 23);
    const std::string csv = io::density_to_csv(rho);
    std::istringstream in(csv);
    auto back = io::density_from_csv(in);
    CHECK(back.grid == rho.grid);
    for (Eigen::Index i = 0; i < rho.values.size(); ++i) CHECK(back.values[i] == rho.values[i]);
    CHECK(back.c_lower == rho.c_lower);
}

TEST_CASE("io: problem spec round trip for each cost kind") {
    for (const auto* kind : {"zero", "sqdist", "grid"}) {
        auto spec = uniform_spec(16, 0.02);
        if (std::string(kind) == "sqdist") spec.cost = CostGrid<double>::squared_distance(spec.f.grid, spec.g.grid, 3.0);
        if (std::string(kind) == "grid") {
            spec.cost.form_tag = "grid";
            std::mt19937 rng(3);
            for (Eigen::Index i = 0; i < 16; ++i)
                for (Eigen::Index j = 0; j < 16; ++j) spec.cost.values(i, j) = std::abs(random_vec(1, rng)[0]);
        }
        auto back = io::problem_spec_from_json(io::problem_spec_to_json(spec));
        CHECK(back.delta == spec.delta);
        CHECK((back.cost.values - spec.cost.values).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(back.f.values == spec.f.values);
    }
}

TEST_CASE("io: coupling and map exchange round trips") {
    auto spec = uniform_spec(12);
    std::mt19937 rng(7);
    Mat<double> kv(12, 12);
    for (Eigen::Index i = 0; i < 12; ++i)
        for (Eigen::Index j = 0; j < 12; ++j) kv(i, j) = 0.01 + std::abs(random_vec(1, rng)[0]);
    Coupling<double> k(spec.f.grid, spec.g.grid, kv, 0.01);
    auto kb = io::coupling_from_json(io::coupling_to_json(k));
    CHECK((kb.values - k.values).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((kb.kx - k.kx).lpNorm<Eigen::Infinity>() == 0.0);

    auto ax = spec.f.grid.axes[0];
    GridAxis<double> ay{0.0, 2.0, 12};
    Vec<double> kx = Vec<double>::Ones(12);
    Vec<double> ky = Vec<double>::Constant(12, 0.5);
    auto map = solve_1d(ax, kx, ay, ky);
    auto mb = io::map_from_json(io::map_to_json(map));
    CHECK((mb.axes[0].T - map.axes[0].T).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((mb.axes[0].dT - map.axes[0].dT).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("io: neural params round trip preserves evaluation and validates invariants") {
    Grid<double> support(-1, 1, 24);
    std::vector<Mat<double>> samples;
    Vec<double> stamps(2);
    stamps << 0.0, 1.0;
    for (int s = 0; s < 2; ++s) {
        Mat<double> m(24, 1);
        for (Eigen::Index i = 0; i < 24; ++i) m(i, 0) = 0.04 * support.center(i)[0] * (1.0 + s);
        samples.push_back(m);
    }
    neural::CompileOptions opts;
    opts.eps1 = 0.2;
    auto res = neural::compile_field(support, samples, stamps, opts);

    auto j = io::neural_params_to_json(res.params);
    auto back = io::neural_params_from_json(io::json::parse(j.dump()));
    Vec<double> x(1);
    x << 0.31;
    CHECK(back.eval(x, 0.4)[0] == res.params.eval(x, 0.4)[0]);
    CHECK(back.N() == res.params.N());

    // tampering with the counting or the factored structure must fail
    auto bad = j;
    bad["N"] = res.params.N() + 1;
    CHECK_THROWS_AS(io::neural_params_from_json(bad), SpecError);
    auto bad2 = j;
    bad2["units"][0]["b"][0] = bad2["units"][0]["b"][0].get<double>() + 1.0;
    if (res.params.dimension > 1) CHECK_THROWS_AS(io::neural_params_from_json(bad2), SpecError);
}

TEST_CASE("cli: solve writes the bundle and honors exit codes") {
    auto dir = temp_dir("cli_solve");
    auto spec = uniform_spec(32);
    io::write_json((dir / "spec.json").string(), io::problem_spec_to_json(spec));

    const int ok = run_cli("solve --spec " + (dir / "spec.json").string() + " --iters 200 --out " + (dir / "out").string());
    CHECK(ok == 0);
    CHECK(fs::exists(dir / "out" / "potential_1.json"));
    CHECK(fs::exists(dir / "out" / "coupling.json"));
    CHECK(fs::exists(dir / "out" / "iterations.csv"));
    auto rep = io::read_json((dir / "out" / "solve_report.json").string());
    CHECK(rep.at("gap").get<double>() <= 1e-8 * (1.0 + std::abs(rep.at("primal").get<double>())));

    // emitted potentials round-trip through the reader
    auto [g1, v1] = io::grid_function_from_json(io::read_json((dir / "out" / "potential_1.json").string()));
    CHECK(v1.size() == 32);
    CHECK((v1.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-5);

    // missing file -> 2
    CHECK(run_cli("solve --spec " + (dir / "nope.json").string()) == 2);

    // delta violating the precondition -> 2
    auto bad = spec;
    bad.delta = 0.5;
    io::write_json((dir / "bad.json").string(), io::problem_spec_to_json(bad));
    // delta = 0.5 is fine for c = 1; push it over instead
    bad.delta = 1.5;
    auto j = io::problem_spec_to_json(spec);
    j["delta"] = 1.5;
    io::write_text((dir / "bad.json").string(), j.dump());
    CHECK(run_cli("solve --spec " + (dir / "bad.json").string()) == 2);

    // non-convergence within the budget -> 3
    CHECK(run_cli("solve --spec " + (dir / "spec.json").string() + " --iters 1 --out " + (dir / "out2").string()) == 3);
}

TEST_CASE("cli: config file drives the run") {
    auto dir = temp_dir("cli_config");
    auto spec = uniform_spec(16);
    io::write_json((dir / "spec.json").string(), io::problem_spec_to_json(spec));
    std::ofstream cfg(dir / "run.cfg");
    cfg << "spec=" << (dir / "spec.json").string() << "\n";
    cfg << "out=" << (dir / "out").string() << "\n";
    cfg << "iters=150\n";
    cfg.close();
    CHECK(run_cli("solve --config " + (dir / "run.cfg").string()) == 0);
    auto rep = io::read_json((dir / "out" / "solve_report.json").string());
    CHECK(rep.at("iterations").get<long>() == 151);
}

TEST_CASE("cli: pipeline bundle is deterministic byte for byte") {
    auto dir = temp_dir("cli_det");
    auto spec = uniform_spec(24);
    io::write_json((dir / "spec.json").string(), io::problem_spec_to_json(spec));
    const std::string flags = " --iters 60 --stamps 9 --compile-stamps 3 --eps0 0.1 --eps1 0.2 --flow-steps 16";
    CHECK(run_cli("pipeline --spec " + (dir / "spec.json").string() + " --out " + (dir / "a").string() + flags) == 0);
    CHECK(run_cli("pipeline --spec " + (dir / "spec.json").string() + " --out " + (dir / "b").string() + flags) == 0);
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto name = entry.path().filename();
        CAPTURE(name.string());
        CHECK(slurp(entry.path()) == slurp(dir / "b" / name));
    }
}

TEST_CASE("cli: metrics subcommand compares two grid functions") {
    auto dir = temp_dir("cli_metrics");
    Grid<double> g(0, 1, 16);
    io::write_json((dir / "a.json").string(), io::grid_function_to_json(g, Vec<double>::Ones(16)));
    io::write_json((dir / "b.json").string(), io::grid_function_to_json(g, Vec<double>::Constant(16, 1.5)));
    CHECK(run_cli("metrics --a " + (dir / "a.json").string() + " --b " + (dir / "b.json").string() + " --out " +
                  (dir / "m.json").string()) == 0);
    auto rep = io::read_json((dir / "m.json").string());
    // total-variation-style gap of 0.5 between constants, sup-norm binding
    CHECK(rep.at("dbl").get<double>() > 0.2);
    CHECK(rep.at("exact").get<bool>());
}

TEST_CASE("cli: external map file replaces the internal solve") {
    auto dir = temp_dir("cli_extmap");
    auto spec = uniform_spec(16);
    io::write_json((dir / "spec.json").string(), io::problem_spec_to_json(spec));

    // identity map in the exchange format
    MonotoneMap<double> ident;
    AxisMap<double> am;
    am.source = spec.f.grid.axes[0];
    am.target = spec.g.grid.axes[0];
    am.T = am.source.centers();
    finite_difference_derivative(am);
    ident.axes.push_back(am);
    io::write_json((dir / "map.json").string(), io::map_to_json(ident));

    CHECK(run_cli("dynamics --spec " + (dir / "spec.json").string() + " --out " + (dir / "out").string() +
                  " --iters 100 --stamps 5 --external-ma-map " + (dir / "map.json").string()) == 0);
    auto rep = io::read_json((dir / "out" / "dynamics_report.json").string());
    CHECK(rep.at("ma_residual_sup").get<double>() < 1e-6);
}
