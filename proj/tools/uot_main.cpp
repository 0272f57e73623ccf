#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "pipeline.hpp"

using uot::app::RunConfig;

namespace {

void add_common_flags(CLI::App* cmd, RunConfig& config) {
    cmd->add_option("--spec", config.spec_path, "problem spec JSON file");
    cmd->add_option("--out", config.out_dir, "output directory");
    cmd->add_option("--iters", config.iters, "iteration budget L");
    cmd->add_option("--tol", config.tol_gap, "early-stop duality-gap tolerance (0: run all iterations)");
    cmd->add_option("--eps0", config.eps0, "dual smoothing L2 budget");
    cmd->add_option("--eps1", config.eps1, "neural field L2 budget");
    cmd->add_option("--horizon", config.horizon, "transport time horizon T");
    cmd->add_option("--stamps", config.stamps, "time stamps for the evolution");
    cmd->add_option("--compile-stamps", config.compile_stamps, "time stamps for the compiled W(t)");
    cmd->add_option("--flow-steps", config.flow_steps, "RK4 steps for the neural flow");
    cmd->add_option("--activation", config.activation, "activation kernel (relu | sigmoid)");
    cmd->add_flag("--paper-literal-bound", config.paper_literal_bound,
                  "use the printed (un-scaled) step-2 upper bound");
    cmd->add_flag("--tensor-ma", config.tensor_ma, "tensor-product Monge-Ampere solve for separable d >= 2 inputs");
    cmd->add_option("--external-ma-map", config.external_ma_path,
                    "map exchange JSON produced by an external Monge-Ampere solver");
    cmd->add_option("--seed", config.seed, "reserved; the pipeline is deterministic");
    cmd->add_option("--config", "flat key=value config file; explicit flags override it")
        ->check(CLI::ExistingFile)
        ->configurable(false);
}

// flat key=value file applied before the CLI flags
void load_flat_config(const std::string& path, RunConfig& config) {
    std::ifstream in(path);
    if (!in) throw uot::SpecError("cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw uot::SpecError("config line is not key=value: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "spec") config.spec_path = val;
        else if (key == "out") config.out_dir = val;
        else if (key == "iters") config.iters = std::stol(val);
        else if (key == "tol") config.tol_gap = std::stod(val);
        else if (key == "eps0") config.eps0 = std::stod(val);
        else if (key == "eps1") config.eps1 = std::stod(val);
        else if (key == "horizon") config.horizon = std::stod(val);
        else if (key == "stamps") config.stamps = std::stoi(val);
        else if (key == "compile_stamps") config.compile_stamps = std::stoi(val);
        else if (key == "flow_steps") config.flow_steps = std::stoi(val);
        else if (key == "activation") config.activation = val;
        else if (key == "paper_literal_bound") config.paper_literal_bound = (val == "1" || val == "true");
        else if (key == "tensor_ma") config.tensor_ma = (val == "1" || val == "true");
        else if (key == "external_ma_map") config.external_ma_path = val;
        else if (key == "seed") config.seed = std::stol(val);
        else throw uot::SpecError("unknown config key: " + key);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularized unbalanced optimal transport: solver, transport dynamics, neural-field compiler"};
    app.require_subcommand(1);

    RunConfig config;
    try {
        for (int i = 1; i + 1 < argc; ++i)
            if (std::string(argv[i]) == "--config") load_flat_config(argv[i + 1], config);
    } catch (const uot::SpecError& e) {
        std::cerr << "spec/config error: " << e.what() << "\n";
        return 2;
    }
    auto* solve = app.add_subcommand("solve", "run the Sinkhorn-type dual solver");
    add_common_flags(solve, config);
    auto* dynamics = app.add_subcommand("dynamics", "solve, then build the transport dynamics");
    add_common_flags(dynamics, config);
    auto* compile = app.add_subcommand("compile", "solve, build dynamics and compile the neural field");
    add_common_flags(compile, config);
    auto* pipeline = app.add_subcommand("pipeline", "full run with metrics and plot data");
    add_common_flags(pipeline, config);

    std::string metrics_a, metrics_b, metrics_out;
    auto* metrics = app.add_subcommand("metrics", "bounded-Lipschitz distance between two grid-function files");
    metrics->add_option("--a", metrics_a, "first grid-function/density JSON")->required();
    metrics->add_option("--b", metrics_b, "second grid-function/density JSON")->required();
    metrics->add_option("--out", metrics_out, "write the report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return uot::app::cmd_solve(config);
        if (dynamics->parsed()) return uot::app::cmd_dynamics(config);
        if (compile->parsed()) return uot::app::cmd_compile(config);
        if (pipeline->parsed()) return uot::app::cmd_pipeline(config);
        if (metrics->parsed()) return uot::app::cmd_metrics(metrics_a, metrics_b, metrics_out);
    } catch (const uot::SpecError& e) {
        std::cerr << "spec/config error: " << e.what() << "\n";
        return 2;
    } catch (const uot::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
