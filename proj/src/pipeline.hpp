#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uot/io.hpp"
#include "uot/metrics.hpp"
#include "uot/transport.hpp"

namespace uot::app {

// Flat run configuration; every field maps to a CLI flag and a key in the
// key=value config file.
struct RunConfig {
    std::string spec_path;
    std::string out_dir = "out";
    long iters = 300;
    double tol_gap = 0.0; // early-stop tolerance; 0 runs all iterations
    double eps0 = 0.05;
    double eps1 = 0.1;
    double horizon = 1.0;
    int stamps = 65;
    int compile_stamps = 9;
    int flow_steps = 64;
    std::string activation = "relu";
    bool paper_literal_bound = false;
    bool tensor_ma = false;
    std::string external_ma_path;
    long seed = 0; // reserved; the pipeline is deterministic

    void validate() const;
};

struct SolveArtifacts {
    ProblemSpec<double> spec;
    SolverParams<double> params;
    RunResult<double> result;
    bool converged = false;
    double gap_threshold = 0.0;
};

struct DynamicsArtifacts {
    DualPotentials<double> duals; // with smoothed tildes
    Coupling<double> coupling;    // recovered from the smoothed duals
    GridDensity<double> fbar, gbar;
    MonotoneMap<double> map;
    DynamicsFields<double> fields;
    EvolvedDensity<double> evolved;
    std::vector<double> stamp_times;
    MaResidualReport<double> ma_report;
    double varsigma0 = 0;
    bool moll_under_resolved = false;
};

struct CompileArtifacts {
    neural::CompileResult<double> compiled;
    Grid<double> support;
    std::vector<double> compile_times;
    double lipschitz = 1.0;
    double min_det_hess = 1.0;
};

struct NeuralEvolution {
    std::vector<double> times;
    std::vector<Vec<double>> positions; // per stamp (d = 1)
    std::vector<Vec<double>> weights;   // Lagrangian masses
    std::vector<double> masses;
};

struct MetricsRow {
    double t;
    double dbl;
    bool exact;
};

SolveArtifacts run_solve(const RunConfig& config);
DynamicsArtifacts run_dynamics(const RunConfig& config, const SolveArtifacts& solve);
CompileArtifacts run_compile(const RunConfig& config, const DynamicsArtifacts& dyn);
NeuralEvolution evolve_neural(const RunConfig& config, const DynamicsArtifacts& dyn, const CompileArtifacts& comp);
std::vector<MetricsRow> run_metrics(const RunConfig& config, const DynamicsArtifacts& dyn,
                                    const NeuralEvolution& neural);

// Subcommand drivers: write the artifact bundle under config.out_dir and
// return the process exit code (0 ok, 2 spec/config error, 3 numerical).
int cmd_solve(const RunConfig& config);
int cmd_dynamics(const RunConfig& config);
int cmd_compile(const RunConfig& config);
int cmd_metrics(const std::string& file_a, const std::string& file_b, const std::string& out_path);
int cmd_pipeline(const RunConfig& config);

} // namespace uot::app
