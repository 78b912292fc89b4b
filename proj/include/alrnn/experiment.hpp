#pragma once

// Experiment orchestration: seeded grid scans over M/P/tau, per-cell
// checkpoints and logs, resumable runs, summary tables and analysis
// reports. Cells never share mutable state, so independent cells may run
// on a worker pool.

#include "alrnn/checkpoint.hpp"
#include "alrnn/config.hpp"
#include "alrnn/tasks.hpp"
#include "alrnn/train.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace alrnn {

struct ExperimentConfig {
    TaskKind task = TaskKind::Copy;
    ConfigFile raw;
    std::vector<long> M_values;
    std::vector<long> P_values;
    std::vector<double> tau_values;
    std::vector<std::uint64_t> seeds;
    TrainConfig base_train;     // seed/tau overridden per cell
    std::uint64_t data_seed = 1000;
    std::string out_dir = "runs";
    int jobs = 1;

    static ExperimentConfig from_config(const ConfigFile& file);
};

/// Dataset for the task described by an experiment config.
TaskDataset make_dataset(TaskKind task, const ConfigFile& raw,
                         std::uint64_t data_seed);

/// Dataset regenerated from a checkpoint's task descriptor.
TaskDataset make_dataset(const TaskDescriptor& descriptor,
                         std::uint64_t data_seed);

struct CellResult {
    long M = 0, P = 0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    std::string checkpoint_path;
    double test_metric = 0.0;
    std::string metric_name;
    bool skipped = false;   // cell already complete (resume)
    bool diverged = false;
};

/// Runs every (M, P, tau, seed) grid cell, skipping cells whose checkpoint
/// already exists with a matching config hash, then writes summary.csv.
/// Returns per-cell results sorted by (M, P, tau, seed).
std::vector<CellResult> run_experiment(const ExperimentConfig& config,
                                       std::ostream& progress);

/// Metric of a stored checkpoint on its regenerated seeded test set.
EvalResult eval_checkpoint(const Checkpoint& ckpt);
EvalResult eval_checkpoint_path(const std::string& path);

/// Aggregated summary (mean +- std across seeds per cell) for a set of
/// results; identical content to the summary.csv run_experiment writes.
void write_summary(const std::vector<CellResult>& results, std::ostream& out);

/// Rebuilds summary.csv from the checkpoints found in a run directory.
void write_summary_from_dir(const std::string& dir, std::ostream& out);

// ---------------------------------------------------------------------------
// Analysis reports
// ---------------------------------------------------------------------------

struct AnalysisOptions {
    bool bitcodes = false;
    bool fixed_points = false;
    bool lyapunov = false;
    bool pca = false;
    bool flow_field = false;
    bool variance = false;
    bool svg = false;
    int flow_dim_x = -1, flow_dim_y = -1; // -1: pick automatically
    std::string out_dir = ".";
    // Path the checkpoint was loaded from; used to locate the companion
    // encoder of SCAN decoder checkpoints and echoed in the report.
    std::string checkpoint_path;
};

/// Runs the selected analyses on a checkpoint's regenerated test set,
/// writes one plot-ready CSV per figure family into out_dir and the
/// structured report to `report`.
void run_analysis(const Checkpoint& ckpt, const AnalysisOptions& options,
                  std::ostream& report);

/// Validates a report against the documented schema; on failure returns
/// false and stores a message in `error` when non-null.
bool validate_analysis_report(std::istream& in, std::string* error = nullptr);

} // namespace alrnn
