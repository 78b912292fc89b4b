#include "alrnn/experiment.hpp"

#include "alrnn/analysis.hpp"
#include "alrnn/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace alrnn {

namespace {

std::string tau_tag(double tau) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", tau);
    return buf;
}

long param_int(const std::map<std::string, std::string>& params,
               const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end())
        throw std::runtime_error("task descriptor: missing parameter '" + key + "'");
    return std::stol(it->second);
}

double param_double(const std::map<std::string, std::string>& params,
                    const std::string& key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : std::stod(it->second);
}

std::vector<std::uint64_t> parse_seeds(const ConfigFile& file) {
    std::vector<std::uint64_t> seeds;
    for (const auto& item : file.get_list("train.seeds"))
        seeds.push_back(std::stoull(item));
    if (seeds.empty()) seeds.push_back(file.get_seed("train.seed", 0));
    return seeds;
}

} // namespace

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& file) {
    ExperimentConfig config;
    config.raw = file;
    config.task = task_kind_from_name(file.get("task"));
    config.M_values = file.get_int_list("model.M", {30});
    config.P_values = file.get_int_list("model.P", {1});
    config.tau_values = file.get_double_list("train.tau", {0.1});
    config.seeds = parse_seeds(file);
    config.data_seed = file.get_seed("task.data_seed", 1000);
    config.out_dir = file.get("out_dir", "runs");
    config.jobs = static_cast<int>(file.get_int("jobs", 1));

    TrainConfig& t = config.base_train;
    t.learning_rate = file.get_double("train.learning_rate", t.learning_rate);
    t.epochs = static_cast<int>(file.get_int("train.epochs", t.epochs));
    t.batch_size = static_cast<int>(file.get_int("train.batch_size", t.batch_size));
    t.m_reg = static_cast<int>(file.get_int("train.m_reg", t.m_reg));
    t.grad_clip_norm = file.get_double("train.grad_clip_norm", t.grad_clip_norm);
    t.validation_fraction =
        file.get_double("train.validation_fraction", t.validation_fraction);
    t.patience = static_cast<int>(file.get_int("train.patience", t.patience));

    if (config.M_values.empty() || config.P_values.empty() ||
        config.tau_values.empty())
        throw std::runtime_error("experiment config: empty grid axis");
    for (long M : config.M_values)
        for (long P : config.P_values)
            if (P > M)
                throw std::runtime_error("experiment config: P > M in grid (" +
                                         std::to_string(P) + " > " +
                                         std::to_string(M) + ")");
    return config;
}

TaskDataset make_dataset(TaskKind task, const ConfigFile& raw,
                         std::uint64_t data_seed) {
    switch (task) {
        case TaskKind::Copy:
            return gen_copy(static_cast<int>(raw.get_int("task.n_sym", 4)),
                            static_cast<int>(raw.get_int("task.n_seq", 8)),
                            static_cast<int>(raw.get_int("task.delay", 200)),
                            static_cast<int>(raw.get_int("task.n_train", 1000)),
                            static_cast<int>(raw.get_int("task.n_test", 200)),
                            data_seed);
        case TaskKind::Addition:
            return gen_addition(static_cast<int>(raw.get_int("task.T", 100)),
                                static_cast<int>(raw.get_int("task.n_train", 2000)),
                                static_cast<int>(raw.get_int("task.n_test", 200)),
                                data_seed);
        case TaskKind::Contextual:
            return gen_contextual(
                static_cast<int>(raw.get_int("task.T_seq", 100)),
                static_cast<int>(raw.get_int("task.n_train", 1000)),
                static_cast<int>(raw.get_int("task.n_test", 200)), data_seed,
                raw.get_double("task.drift", 0.1),
                raw.get_int("task.recall_cue", 0) != 0);
        case TaskKind::Scan:
            return gen_scan_simple_split(raw.get_double("task.split_fraction", 0.8),
                                         data_seed);
    }
    throw std::runtime_error("make_dataset: unknown task");
}

TaskDataset make_dataset(const TaskDescriptor& descriptor,
                         std::uint64_t data_seed) {
    const auto& p = descriptor.params;
    switch (descriptor.kind) {
        case TaskKind::Copy:
            return gen_copy(static_cast<int>(param_int(p, "n_sym")),
                            static_cast<int>(param_int(p, "n_seq")),
                            static_cast<int>(param_int(p, "delay")),
                            static_cast<int>(param_int(p, "n_train")),
                            static_cast<int>(param_int(p, "n_test")), data_seed);
        case TaskKind::Addition:
            return gen_addition(static_cast<int>(param_int(p, "T")),
                                static_cast<int>(param_int(p, "n_train")),
                                static_cast<int>(param_int(p, "n_test")),
                                data_seed);
        case TaskKind::Contextual:
            return gen_contextual(static_cast<int>(param_int(p, "T_seq")),
                                  static_cast<int>(param_int(p, "n_train")),
                                  static_cast<int>(param_int(p, "n_test")),
                                  data_seed, param_double(p, "drift", 0.1),
                                  param_int(p, "recall_cue") != 0);
        case TaskKind::Scan:
            return gen_scan_simple_split(param_double(p, "split_fraction", 0.8),
                                         data_seed);
    }
    throw std::runtime_error("make_dataset: unknown task");
}

namespace {

struct Cell {
    long M, P;
    double tau;
    std::uint64_t seed;
};

std::string cell_stem(const Cell& c) {
    std::ostringstream name;
    name << "M" << c.M << "_P" << c.P << "_tau" << tau_tag(c.tau) << "_seed"
         << c.seed;
    return name.str();
}

/// Stable identity of one grid cell: every result-affecting config key
/// plus the cell coordinates. Output location and worker count excluded.
std::string cell_config_hash(const ExperimentConfig& config, const Cell& c) {
    ConfigFile id;
    for (const auto& [k, v] : config.raw.values())
        if (k != "out_dir" && k != "jobs" && k != "model.M" && k != "model.P" &&
            k != "train.tau" && k != "train.seeds" && k != "train.seed")
            id.set(k, v);
    id.set("cell.M", std::to_string(c.M));
    id.set("cell.P", std::to_string(c.P));
    id.set("cell.tau", format_double(c.tau));
    id.set("cell.seed", std::to_string(c.seed));
    id.set("cell.data_seed", std::to_string(config.data_seed));
    // Defaulted training keys participate so that changing a default is
    // not mistaken for an already-completed cell.
    const TrainConfig& t = config.base_train;
    id.set("cell.learning_rate", format_double(t.learning_rate));
    id.set("cell.epochs", std::to_string(t.epochs));
    id.set("cell.batch_size", std::to_string(t.batch_size));
    id.set("cell.m_reg", std::to_string(t.m_reg));
    id.set("cell.grad_clip_norm", format_double(t.grad_clip_norm));
    id.set("cell.validation_fraction", format_double(t.validation_fraction));
    id.set("cell.patience", std::to_string(t.patience));
    return fnv1a_hex(id.canonical());
}

std::map<std::string, std::string> config_echo(const TrainConfig& t, long M,
                                               long P) {
    return {{"learning_rate", format_double(t.learning_rate)},
            {"epochs", std::to_string(t.epochs)},
            {"batch_size", std::to_string(t.batch_size)},
            {"tau", format_double(t.tau)},
            {"m_reg", std::to_string(t.m_reg)},
            {"grad_clip_norm", format_double(t.grad_clip_norm)},
            {"validation_fraction", format_double(t.validation_fraction)},
            {"patience", std::to_string(t.patience)},
            {"M", std::to_string(M)},
            {"P", std::to_string(P)}};
}

bool cell_complete(const std::string& path, const std::string& hash) {
    if (!fs::exists(path)) return false;
    try {
        return load_checkpoint(path).config_hash == hash;
    } catch (const std::exception&) {
        return false; // partial/corrupt file: retrain the cell
    }
}

CellResult run_cell(const ExperimentConfig& config, const TaskDataset& dataset,
                    const Cell& cell) {
    CellResult result;
    result.M = cell.M;
    result.P = cell.P;
    result.tau = cell.tau;
    result.seed = cell.seed;

    const std::string stem = cell_stem(cell);
    const std::string ckpt_path =
        (fs::path(config.out_dir) / ("ckpt_" + stem + ".txt")).string();
    const std::string enc_path =
        (fs::path(config.out_dir) / ("ckpt_" + stem + "_enc.txt")).string();
    const std::string log_path =
        (fs::path(config.out_dir) / ("log_" + stem + ".csv")).string();
    const std::string hash = cell_config_hash(config, cell);
    result.checkpoint_path = ckpt_path;

    const bool scan = config.task == TaskKind::Scan;
    if (cell_complete(ckpt_path, hash) && (!scan || cell_complete(enc_path, hash))) {
        result.skipped = true;
    } else {
        TrainConfig train_config = config.base_train;
        train_config.tau = cell.tau;
        train_config.seed = cell.seed;

        Checkpoint ckpt;
        ckpt.task = dataset.descriptor;
        ckpt.data_seed = config.data_seed;
        ckpt.train_seed = cell.seed;
        ckpt.train_config_echo =
            config_echo(train_config, cell.M, cell.P);
        ckpt.config_hash = hash;

        TrainLog log;
        if (scan) {
            Seq2SeqResult r = train_scan(dataset, train_config,
                                         static_cast<int>(cell.M),
                                         static_cast<int>(cell.P),
                                         static_cast<int>(cell.P));
            log = r.log;
            Checkpoint enc = ckpt;
            enc.params = r.model.encoder;
            enc.readout.D = Mat::Zero(dataset.descriptor.output_dim, cell.M);
            enc.readout.bias = Vec::Zero(dataset.descriptor.output_dim);
            enc.train_config_echo["role"] = "encoder";
            save_checkpoint(enc, enc_path);

            ckpt.params = r.model.decoder;
            ckpt.readout = r.model.decoder_readout;
            ckpt.train_config_echo["role"] = "decoder";
            ckpt.train_config_echo["companion"] =
                fs::path(enc_path).filename().string();
        } else {
            TrainResult r = train(dataset, train_config,
                                  static_cast<int>(cell.M),
                                  static_cast<int>(cell.P));
            log = r.log;
            ckpt.params = r.params;
            ckpt.readout = r.readout;
        }
        result.diverged = log.diverged;
        save_checkpoint(ckpt, ckpt_path);
        std::ofstream log_out(log_path, std::ios::binary);
        if (!log_out)
            throw std::runtime_error("cannot open '" + log_path + "' for writing");
        write_training_log(log, log_out);
    }

    const EvalResult eval = eval_checkpoint_path(ckpt_path);
    result.test_metric = eval.value;
    result.metric_name = eval.metric_name;
    return result;
}

} // namespace

EvalResult eval_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.task.kind == TaskKind::Scan)
        throw std::runtime_error(
            "eval_checkpoint: SCAN needs the encoder companion; use "
            "eval_checkpoint_path on the decoder file");
    const TaskDataset dataset = make_dataset(ckpt.task, ckpt.data_seed);
    if (dataset.descriptor.input_dim != ckpt.params.K)
        throw std::runtime_error(
            "eval: input dim mismatch: task K=" +
            std::to_string(dataset.descriptor.input_dim) +
            " vs checkpoint K=" + std::to_string(ckpt.params.K));
    return evaluate(ckpt.params, ckpt.readout, dataset.test, ckpt.task.kind);
}

EvalResult eval_checkpoint_path(const std::string& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.task.kind != TaskKind::Scan) return eval_checkpoint(ckpt);

    const auto role = ckpt.train_config_echo.find("role");
    if (role == ckpt.train_config_echo.end() || role->second != "decoder")
        throw std::runtime_error(
            "eval: SCAN evaluation takes the decoder checkpoint (role=decoder)");
    const auto companion = ckpt.train_config_echo.find("companion");
    if (companion == ckpt.train_config_echo.end())
        throw std::runtime_error("eval: SCAN decoder lacks a companion encoder");
    const std::string enc_path =
        (fs::path(path).parent_path() / companion->second).string();
    const Checkpoint enc = load_checkpoint(enc_path);
    if (enc.params.M != ckpt.params.M)
        throw std::runtime_error(
            "eval: encoder/decoder M mismatch: " + std::to_string(enc.params.M) +
            " vs " + std::to_string(ckpt.params.M));
    const TaskDataset dataset = make_dataset(ckpt.task, ckpt.data_seed);
    return evaluate_scan(enc.params, ckpt.params, ckpt.readout, dataset.test);
}

std::vector<CellResult> run_experiment(const ExperimentConfig& config,
                                       std::ostream& progress) {
    fs::create_directories(config.out_dir);
    const TaskDataset dataset =
        make_dataset(config.task, config.raw, config.data_seed);

    std::vector<Cell> cells;
    for (long M : config.M_values)
        for (long P : config.P_values)
            for (double tau : config.tau_values)
                for (std::uint64_t seed : config.seeds)
                    cells.push_back({M, P, tau, seed});

    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                results[i] = run_cell(config, dataset, cells[i]);
                std::lock_guard<std::mutex> lock(io_mutex);
                progress << (results[i].skipped ? "skip " : "done ")
                         << cell_stem(cells[i]) << " " << results[i].metric_name
                         << "=" << format_double(results[i].test_metric)
                         << (results[i].diverged ? " (diverged)" : "") << "\n";
            } catch (...) {
                std::lock_guard<std::mutex> lock(io_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(config.jobs,
                                               static_cast<int>(cells.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::sort(results.begin(), results.end(),
              [](const CellResult& a, const CellResult& b) {
                  return std::tie(a.M, a.P, a.tau, a.seed) <
                         std::tie(b.M, b.P, b.tau, b.seed);
              });

    {
        std::ofstream cells_out(fs::path(config.out_dir) / "cells.csv",
                                std::ios::binary);
        cells_out << "M,P,tau,seed,metric,value,diverged,checkpoint\n";
        for (const auto& r : results)
            cells_out << r.M << "," << r.P << "," << format_double(r.tau) << ","
                      << r.seed << "," << r.metric_name << ","
                      << format_double(r.test_metric) << ","
                      << (r.diverged ? 1 : 0) << ","
                      << fs::path(r.checkpoint_path).filename().string() << "\n";
    }
    {
        std::ofstream summary_out(fs::path(config.out_dir) / "summary.csv",
                                  std::ios::binary);
        write_summary(results, summary_out);
    }
    return results;
}

void write_summary(const std::vector<CellResult>& results, std::ostream& out) {
    std::vector<CellResult> sorted = results;
    std::sort(sorted.begin(), sorted.end(),
              [](const CellResult& a, const CellResult& b) {
                  return std::tie(a.M, a.P, a.tau, a.seed) <
                         std::tie(b.M, b.P, b.tau, b.seed);
              });
    out << "M,P,tau,metric,n_seeds,mean,std\n";
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < sorted.size() && sorted[j].M == sorted[i].M &&
               sorted[j].P == sorted[i].P && sorted[j].tau == sorted[i].tau) {
            sum += sorted[j].test_metric;
            ++j;
        }
        const double n = static_cast<double>(j - i);
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t k = i; k < j; ++k) {
            const double d = sorted[k].test_metric - mean;
            ss += d * d;
        }
        const double sd = n > 1.0 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        out << sorted[i].M << "," << sorted[i].P << ","
            << format_double(sorted[i].tau) << "," << sorted[i].metric_name << ","
            << (j - i) << "," << format_double(mean) << "," << format_double(sd)
            << "\n";
        i = j;
    }
}

void write_summary_from_dir(const std::string& dir, std::ostream& out) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("ckpt_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".txt" &&
            name.find("_enc.txt") == std::string::npos)
            paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<CellResult> results;
    for (const auto& path : paths) {
        const Checkpoint ckpt = load_checkpoint(path);
        CellResult r;
        r.M = ckpt.params.M;
        r.P = ckpt.params.P;
        const auto tau = ckpt.train_config_echo.find("tau");
        r.tau = tau == ckpt.train_config_echo.end() ? 0.0 : std::stod(tau->second);
        r.seed = ckpt.train_seed;
        r.checkpoint_path = path;
        const EvalResult eval = eval_checkpoint_path(path);
        r.test_metric = eval.value;
        r.metric_name = eval.metric_name;
        results.push_back(r);
    }
    write_summary(results, out);
}

} // namespace alrnn
