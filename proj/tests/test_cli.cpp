#include "alrnn/checkpoint.hpp"
#include "alrnn/config.hpp"
#include "alrnn/experiment.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace alrnn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

long count_lines(const std::string& text) {
    long n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

const char* kTinyGrid = R"(task = contextual
out_dir = {OUT}
[task]
T_seq = 8
n_train = 30
n_test = 10
data_seed = 77
[model]
M = 5
P = 1, 2
[train]
epochs = 2
batch_size = 8
tau = 0.1
seeds = 0, 1, 2
)";

ExperimentConfig tiny_grid(const std::string& out_dir) {
    std::string text = kTinyGrid;
    text.replace(text.find("{OUT}"), 5, out_dir);
    return ExperimentConfig::from_config(ConfigFile::parse_string(text));
}

} // namespace

TEST_CASE("config parsing: sections, lists, comments, canonical form") {
    const ConfigFile cfg = ConfigFile::parse_string(
        "# a comment\n"
        "task = copy\n"
        "\n"
        "[model]\n"
        "M = 30   # trailing comment\n"
        "P = 0, 1, 30\n"
        "[train]\n"
        "tau = 0.1\n"
        "learning_rate = 1e-3\n");
    CHECK(cfg.get("task") == "copy");
    CHECK(cfg.get_int("model.M", -1) == 30);
    CHECK(cfg.get_int_list("model.P", {}) == std::vector<long>{0, 1, 30});
    CHECK(cfg.get_double("train.tau", 0.0) == 0.1);
    CHECK(cfg.get_double("train.learning_rate", 0.0) == 1e-3);
    CHECK(cfg.get("missing", "fallback") == "fallback");
    CHECK_THROWS_AS(cfg.get("missing"), std::exception);
    CHECK_FALSE(cfg.has("model.Q"));

    // canonical rendering is sorted and stable
    const std::string canon = cfg.canonical();
    CHECK(canon == ConfigFile::parse_string(canon).canonical());
    CHECK(canon.find("model.M = 30") != std::string::npos);
    CHECK(canon.find("model.M") < canon.find("model.P"));
    CHECK(canon.find("model.P") < canon.find("train.tau"));
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0, -7.25,
                     123456789.123456789}) {
        const std::string text = format_double(v);
        CHECK(std::stod(text) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("fnv1a_hex is stable and collision-sensitive") {
    CHECK(fnv1a_hex("abc") == fnv1a_hex("abc"));
    CHECK(fnv1a_hex("abc") != fnv1a_hex("abd"));
    CHECK(fnv1a_hex("") != "");
}

TEST_CASE("checkpoint save/load round trip is byte-identical") {
    Checkpoint ckpt;
    ckpt.params = ModelParams(4, 2, 3);
    ckpt.params.A_diag[2] = 1.0 / 3.0;
    ckpt.params.W.setRandom();
    ckpt.params.C.setRandom();
    ckpt.params.h.setRandom();
    ckpt.readout.D = Mat::Random(2, 4);
    ckpt.readout.bias = Vec::Random(2);
    ckpt.task.kind = TaskKind::Contextual;
    ckpt.task.params = {{"T_seq", "8"}, {"n_train", "30"}, {"n_test", "10"},
                        {"drift", "0.1"}, {"recall_cue", "0"}};
    ckpt.task.input_dim = 3;
    ckpt.task.output_dim = 2;
    ckpt.data_seed = 77;
    ckpt.train_seed = 5;
    ckpt.train_config_echo = {{"epochs", "2"}, {"tau", "0.10000000000000001"}};
    ckpt.config_hash = fnv1a_hex("x");

    std::ostringstream first;
    save_checkpoint(ckpt, first);
    std::istringstream in(first.str());
    const Checkpoint loaded = load_checkpoint(in);
    CHECK(loaded.params.W == ckpt.params.W);
    CHECK(loaded.params.A_diag == ckpt.params.A_diag);
    CHECK(loaded.readout.D == ckpt.readout.D);
    CHECK(loaded.task.params == ckpt.task.params);
    CHECK(loaded.train_config_echo == ckpt.train_config_echo);
    CHECK(loaded.config_hash == ckpt.config_hash);
    CHECK(loaded.data_seed == 77);

    std::ostringstream second;
    save_checkpoint(loaded, second);
    CHECK(first.str() == second.str());
}

TEST_CASE("checkpoint loading rejects corrupt input") {
    Checkpoint ckpt;
    ckpt.params = ModelParams(3, 1, 1);
    ckpt.readout.D = Mat::Zero(1, 3);
    ckpt.readout.bias = Vec::Zero(1);
    ckpt.task.kind = TaskKind::Addition;
    std::ostringstream out;
    save_checkpoint(ckpt, out);
    const std::string text = out.str();

    // truncation at any coarse prefix fails loudly
    for (std::size_t cut : {text.size() / 4, text.size() / 2, text.size() - 5}) {
        std::istringstream in(text.substr(0, cut));
        CHECK_THROWS_AS(load_checkpoint(in), std::exception);
    }
    // a violated A-zeroing invariant is caught at load time
    ckpt.params.A_diag[0] = 0.5; // linear unit must be exactly 0
    std::ostringstream bad;
    save_checkpoint(ckpt, bad);
    std::istringstream in(bad.str());
    CHECK_THROWS_AS(load_checkpoint(in), std::exception);
}

TEST_CASE("grid experiment: checkpoints, summary, resume, eval consistency") {
    const std::string out_dir = "test_runs_grid";
    fs::remove_all(out_dir);
    const ExperimentConfig config = tiny_grid(out_dir);
    std::ostringstream progress;

    const auto results = run_experiment(config, progress);
    REQUIRE(results.size() == 6); // 1 M x 2 P x 1 tau x 3 seeds
    for (const auto& r : results) {
        CHECK_FALSE(r.skipped);
        CHECK(fs::exists(r.checkpoint_path));
        CHECK(r.metric_name == "accuracy");
    }
    const std::string summary = slurp(fs::path(out_dir) / "summary.csv");
    CHECK(count_lines(summary) == 3); // header + one row per (M, P, tau)
    CHECK(summary.rfind("M,P,tau,metric,n_seeds,mean,std\n", 0) == 0);
    CHECK(slurp(fs::path(out_dir) / "cells.csv").size() > 0);

    // rerun: every cell skipped, byte-identical outputs
    std::ostringstream progress2;
    const auto rerun = run_experiment(config, progress2);
    for (const auto& r : rerun) CHECK(r.skipped);
    CHECK(slurp(fs::path(out_dir) / "summary.csv") == summary);

    // the reported metric equals a fresh evaluation of the stored checkpoint
    for (const auto& r : rerun)
        CHECK(eval_checkpoint_path(r.checkpoint_path).value == r.test_metric);

    // summary row (M=5, P=1) aggregates the three seed metrics
    double sum = 0.0;
    for (const auto& r : rerun)
        if (r.P == 1) sum += r.test_metric;
    std::istringstream rows(summary);
    std::string line;
    std::getline(rows, line); // header
    std::getline(rows, line); // M=5, P=1 row
    CHECK(line.rfind("5,1,", 0) == 0);
    const auto mean_pos = line.rfind(',', line.rfind(',') - 1);
    const double mean = std::stod(line.substr(mean_pos + 1));
    CHECK(mean == doctest::Approx(sum / 3.0).epsilon(1e-15));

    // deleting one checkpoint retrains exactly that cell
    fs::remove(rerun[0].checkpoint_path);
    std::ostringstream progress3;
    const auto resumed = run_experiment(config, progress3);
    int retrained = 0;
    for (const auto& r : resumed)
        if (!r.skipped) ++retrained;
    CHECK(retrained == 1);
    CHECK(slurp(fs::path(out_dir) / "summary.csv") == summary);

    // a config change (more epochs) invalidates every cell hash
    ExperimentConfig changed = config;
    changed.base_train.epochs = 3;
    changed.raw.set("train.epochs", "3");
    std::ostringstream progress4;
    for (const auto& r : run_experiment(changed, progress4))
        CHECK_FALSE(r.skipped);

    fs::remove_all(out_dir);
}

TEST_CASE("experiment config validation") {
    CHECK_THROWS_AS(ExperimentConfig::from_config(ConfigFile::parse_string(
                        "task = copy\n[model]\nM = 4\nP = 5\n")),
                    std::exception); // P > M
    CHECK_THROWS_AS(ExperimentConfig::from_config(
                        ConfigFile::parse_string("[model]\nM = 4\n")),
                    std::exception); // missing task
}

TEST_CASE("analysis report: schema-valid output, CSVs, corruption detection") {
    const std::string out_dir = "test_runs_analysis";
    fs::remove_all(out_dir);
    const ExperimentConfig config = [&] {
        ExperimentConfig c = tiny_grid(out_dir);
        c.P_values = {2};
        c.seeds = {0};
        return c;
    }();
    std::ostringstream progress;
    const auto results = run_experiment(config, progress);
    REQUIRE(results.size() == 1);

    const Checkpoint ckpt = load_checkpoint(results[0].checkpoint_path);
    AnalysisOptions options;
    options.bitcodes = true;
    options.fixed_points = true;
    options.lyapunov = true;
    options.pca = true;
    options.flow_field = true;
    options.variance = true;
    options.out_dir = out_dir;
    options.checkpoint_path = results[0].checkpoint_path;

    std::ostringstream report;
    run_analysis(ckpt, options, report);
    const std::string text = report.str();
    CHECK(text.rfind("alrnn-analysis v1\n", 0) == 0);

    std::istringstream validate_in(text);
    std::string error;
    CHECK(validate_analysis_report(validate_in, &error));
    CHECK(error.empty());

    for (const char* name : {"bitcodes.csv", "fixed_points.csv", "pca.csv",
                             "flow_field.csv", "variance.csv"})
        CHECK(fs::exists(fs::path(out_dir) / name));

    // the fixed-point table covers at most all 2^P = 4 subregions
    CHECK(count_lines(slurp(fs::path(out_dir) / "fixed_points.csv")) <= 5);

    // corrupted reports are rejected with a message
    std::istringstream corrupt(text + "rogue = 1\n");
    CHECK_FALSE(validate_analysis_report(corrupt, &error));
    CHECK_FALSE(error.empty());

    std::istringstream bad_header("alrnn-analysis v2\n");
    CHECK_FALSE(validate_analysis_report(bad_header, &error));

    std::string missing_key = text;
    const auto pos = missing_key.find("[bitcodes]");
    REQUIRE(pos != std::string::npos);
    missing_key.insert(pos, "stray line without equals\n");
    std::istringstream stray(missing_key);
    CHECK_FALSE(validate_analysis_report(stray, &error));

    fs::remove_all(out_dir);
}

TEST_CASE("command line exit codes" * doctest::skip(!fs::exists("alrnn"))) {
    auto run = [](const std::string& cmd) {
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };
    CHECK(run("./alrnn --help > /dev/null 2>&1") == 0);
    CHECK(run("./alrnn > /dev/null 2>&1") == 1);           // missing verb
    CHECK(run("./alrnn bogus-verb > /dev/null 2>&1") == 1);
    CHECK(run("./alrnn eval --checkpoint /nonexistent.txt > /dev/null 2>&1") == 2);

    // report --validate distinguishes valid from invalid files
    std::ofstream("test_cli_invalid_report.txt") << "not a report\n";
    CHECK(run("./alrnn report --validate test_cli_invalid_report.txt "
              "> /dev/null 2>&1") == 2);
    fs::remove("test_cli_invalid_report.txt");
}
