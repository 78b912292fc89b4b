// Command-line front end: train (grid runner), eval, analyze, scan-data,
// report. Exit codes: 0 success, 1 usage/config error, 2 runtime error.

#include "alrnn/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace alrnn;

namespace {

int cmd_train(const std::string& config_path, long seed_override,
              int jobs_override, const std::string& out_override) {
    ConfigFile file = ConfigFile::parse_file(config_path);
    if (seed_override >= 0) {
        file.set("train.seeds", std::to_string(seed_override));
    }
    if (jobs_override > 0) file.set("jobs", std::to_string(jobs_override));
    if (!out_override.empty()) file.set("out_dir", out_override);

    const ExperimentConfig config = ExperimentConfig::from_config(file);
    run_experiment(config, std::cout);
    std::cout << "summary " << (fs::path(config.out_dir) / "summary.csv").string()
              << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path) {
    const EvalResult result = eval_checkpoint_path(checkpoint_path);
    std::cout << result.metric_name << " " << format_double(result.value) << "\n";
    return 0;
}

int cmd_analyze(const std::string& checkpoint_path, AnalysisOptions options,
                const std::vector<int>& flow_dims) {
    if (!flow_dims.empty()) {
        if (flow_dims.size() != 2)
            throw CLI::ValidationError("--flow-dims takes exactly two indices");
        options.flow_dim_x = flow_dims[0];
        options.flow_dim_y = flow_dims[1];
    }
    options.checkpoint_path = checkpoint_path;
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);

    std::ostringstream report;
    run_analysis(ckpt, options, report);

    std::istringstream check(report.str());
    std::string schema_error;
    if (!validate_analysis_report(check, &schema_error))
        throw std::runtime_error("analyze: emitted report failed schema check: " +
                                 schema_error);

    const fs::path report_path = fs::path(options.out_dir) / "analysis.txt";
    std::ofstream out(report_path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + report_path.string() +
                                 "' for writing");
    out << report.str();
    std::cout << report.str();
    return 0;
}

int cmd_scan_data(const std::string& out_dir, std::uint64_t seed,
                  double fraction) {
    fs::create_directories(out_dir);
    const auto commands = scan_all_commands();

    std::ofstream corpus(fs::path(out_dir) / "corpus.tsv", std::ios::binary);
    if (!corpus) throw std::runtime_error("cannot write corpus.tsv");
    for (const auto& cmd : commands) {
        corpus << cmd << "\t";
        const auto actions = scan_interpret(cmd);
        for (std::size_t i = 0; i < actions.size(); ++i)
            corpus << (i ? " " : "") << actions[i];
        corpus << "\n";
    }

    const auto [train_idx, test_idx] =
        scan_split_indices(fraction, seed, commands.size());
    const auto write_index = [&](const std::string& name,
                                 const std::vector<std::size_t>& idx) {
        std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + name);
        for (std::size_t i : idx) out << i << "\n";
    };
    write_index("split_train.idx", train_idx);
    write_index("split_test.idx", test_idx);
    std::cout << "corpus " << commands.size() << " commands, train "
              << train_idx.size() << ", test " << test_idx.size() << "\n";
    return 0;
}

int cmd_report(const std::string& dir, const std::string& validate_path) {
    if (!validate_path.empty()) {
        std::ifstream in(validate_path, std::ios::binary);
        if (!in)
            throw std::runtime_error("cannot open '" + validate_path + "'");
        std::string error;
        if (!validate_analysis_report(in, &error)) {
            std::cout << "invalid: " << error << "\n";
            return 2;
        }
        std::cout << "valid\n";
        return 0;
    }
    std::ostringstream summary;
    write_summary_from_dir(dir, summary);
    const fs::path out_path = fs::path(dir) / "summary.csv";
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + out_path.string() +
                                 "' for writing");
    out << summary.str();
    std::cout << summary.str();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Almost-linear RNN training and dynamical analysis"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "Run a training grid from a config file");
    std::string train_config, train_out;
    long train_seed = -1;
    int train_jobs = 0;
    train_cmd->add_option("--config", train_config, "Experiment config file")
        ->required();
    train_cmd->add_option("--seed", train_seed, "Override: train on this single seed");
    train_cmd->add_option("--jobs", train_jobs, "Worker pool size for grid cells");
    train_cmd->add_option("--out", train_out, "Override output directory");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on its regenerated test set");
    std::string eval_ckpt;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Dynamical analyses of a checkpoint");
    std::string analyze_ckpt;
    AnalysisOptions analysis;
    std::vector<int> flow_dims;
    analyze_cmd->add_option("--checkpoint", analyze_ckpt, "Checkpoint file")->required();
    analyze_cmd->add_flag("--bitcodes", analysis.bitcodes, "Subregion usage statistics");
    analyze_cmd->add_flag("--fixed-points", analysis.fixed_points, "Subregion fixed points and stability");
    analyze_cmd->add_flag("--lyapunov", analysis.lyapunov, "Maximum Lyapunov exponent");
    analyze_cmd->add_flag("--pca", analysis.pca, "State-space PCA");
    analyze_cmd->add_flag("--flow-field", analysis.flow_field, "2-D flow field slice");
    analyze_cmd->add_flag("--variance", analysis.variance, "Class-manifold variance metrics");
    analyze_cmd->add_flag("--svg", analysis.svg, "Also render SVG figures");
    analyze_cmd->add_option("--flow-dims", flow_dims, "Flow-field coordinate pair (x y)")
        ->expected(2);
    analyze_cmd->add_option("--out", analysis.out_dir, "Output directory");

    // scan-data
    auto* scan_cmd = app.add_subcommand("scan-data", "Export the SCAN corpus and split index files");
    std::string scan_out = ".";
    std::uint64_t scan_seed = 1000;
    double scan_fraction = 0.8;
    scan_cmd->add_option("--out", scan_out, "Output directory");
    scan_cmd->add_option("--seed", scan_seed, "Split seed");
    scan_cmd->add_option("--fraction", scan_fraction, "Train fraction of the split");

    // report
    auto* report_cmd = app.add_subcommand("report", "Rebuild a run summary or validate an analysis report");
    std::string report_dir = ".", report_validate;
    report_cmd->add_option("--dir", report_dir, "Run directory with checkpoints");
    report_cmd->add_option("--validate", report_validate, "Validate an analysis report file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed())
            return cmd_train(train_config, train_seed, train_jobs, train_out);
        if (eval_cmd->parsed()) return cmd_eval(eval_ckpt);
        if (analyze_cmd->parsed())
            return cmd_analyze(analyze_ckpt, analysis, flow_dims);
        if (scan_cmd->parsed())
            return cmd_scan_data(scan_out, scan_seed, scan_fraction);
        if (report_cmd->parsed()) return cmd_report(report_dir, report_validate);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
