#include "alrnn/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

namespace alrnn {

std::string task_kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::Copy: return "copy";
        case TaskKind::Addition: return "addition";
        case TaskKind::Contextual: return "contextual";
        case TaskKind::Scan: return "scan";
    }
    throw std::invalid_argument("task_kind_name: unknown kind");
}

TaskKind task_kind_from_name(const std::string& name) {
    if (name == "copy") return TaskKind::Copy;
    if (name == "addition") return TaskKind::Addition;
    if (name == "contextual") return TaskKind::Contextual;
    if (name == "scan") return TaskKind::Scan;
    throw std::invalid_argument("unknown task '" + name + "'");
}

namespace {

std::string format_param(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

TaskInstance make_copy_instance(const std::vector<long>& symbols, int n_sym,
                                int delay) {
    const int n_seq = static_cast<int>(symbols.size());
    const long T = n_seq + delay + 1 + n_seq;
    TaskInstance inst;
    inst.inputs = Mat::Zero(n_sym + 1, T);
    for (int t = 0; t < n_seq; ++t) inst.inputs(symbols[t], t) = 1.0;
    inst.inputs(n_sym, n_seq + delay) = 1.0; // cue channel
    inst.target_type = TargetType::ClassSequence;
    inst.sequence_target = symbols;
    inst.loss_window = {T - n_seq, T};
    return inst;
}

} // namespace

TaskDataset gen_copy(int n_sym, int n_seq, int delay, int n_train, int n_test,
                     std::uint64_t seed) {
    if (n_sym < 2) throw std::invalid_argument("gen_copy: n_sym must be >= 2");
    TaskDataset ds;
    ds.seed = seed;
    ds.descriptor.kind = TaskKind::Copy;
    ds.descriptor.params = {{"n_sym", std::to_string(n_sym)},
                            {"n_seq", std::to_string(n_seq)},
                            {"delay", std::to_string(delay)},
                            {"n_train", std::to_string(n_train)},
                            {"n_test", std::to_string(n_test)}};
    ds.descriptor.input_dim = n_sym + 1;
    ds.descriptor.output_dim = n_sym;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<long> sym(0, n_sym - 1);
    auto draw = [&]() {
        std::vector<long> symbols(n_seq);
        for (auto& s : symbols) s = sym(rng);
        return make_copy_instance(symbols, n_sym, delay);
    };
    for (int i = 0; i < n_train; ++i) ds.train.push_back(draw());
    for (int i = 0; i < n_test; ++i) ds.test.push_back(draw());
    return ds;
}

TaskDataset gen_addition(int T, int n_train, int n_test, std::uint64_t seed) {
    if (T < 4) throw std::invalid_argument("gen_addition: T must be >= 4");
    TaskDataset ds;
    ds.seed = seed;
    ds.descriptor.kind = TaskKind::Addition;
    ds.descriptor.params = {{"T", std::to_string(T)},
                            {"n_train", std::to_string(n_train)},
                            {"n_test", std::to_string(n_test)}};
    ds.descriptor.input_dim = 2;
    ds.descriptor.output_dim = 1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<long> pos(0, T / 2 - 1);
    auto draw = [&]() {
        TaskInstance inst;
        inst.inputs = Mat::Zero(2, T);
        for (long t = 0; t < T; ++t) inst.inputs(0, t) = value(rng);
        long p1 = pos(rng);
        long p2 = pos(rng);
        while (p2 == p1) p2 = pos(rng);
        inst.inputs(1, p1) = 1.0;
        inst.inputs(1, p2) = 1.0;
        inst.target_type = TargetType::Scalar;
        inst.scalar_target = inst.inputs(0, p1) + inst.inputs(0, p2);
        inst.loss_window = {T - 1, T};
        inst.meta["mask_positions"] =
            std::to_string(std::min(p1, p2)) + "," + std::to_string(std::max(p1, p2));
        return inst;
    };
    for (int i = 0; i < n_train; ++i) ds.train.push_back(draw());
    for (int i = 0; i < n_test; ++i) ds.test.push_back(draw());
    return ds;
}

TaskDataset gen_contextual(int T_seq, int n_train, int n_test,
                           std::uint64_t seed, double drift,
                           bool recall_cue_channel) {
    if (T_seq < 2)
        throw std::invalid_argument("gen_contextual: T_seq must be >= 2");
    TaskDataset ds;
    ds.seed = seed;
    ds.descriptor.kind = TaskKind::Contextual;
    ds.descriptor.params = {{"T_seq", std::to_string(T_seq)},
                            {"drift", format_param(drift)},
                            {"recall_cue", recall_cue_channel ? "1" : "0"},
                            {"n_train", std::to_string(n_train)},
                            {"n_test", std::to_string(n_test)}};
    ds.descriptor.input_dim = recall_cue_channel ? 4 : 3;
    ds.descriptor.output_dim = 2;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coin(0, 1);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto draw = [&]() {
        TaskInstance inst;
        inst.inputs = Mat::Zero(ds.descriptor.input_dim, T_seq);
        const int context = coin(rng);          // 0 or 1
        const double mu = coin(rng) ? drift : -drift;
        inst.inputs(context, 0) = 1.0;
        double cumsum = 0.0;
        for (long t = 0; t < T_seq; ++t) {
            const double e = mu + noise(rng);
            inst.inputs(2, t) = e;
            cumsum += e;
        }
        if (recall_cue_channel) inst.inputs(3, T_seq - 1) = 1.0;
        long label = cumsum > 0.0 ? 1 : 0;
        if (context == 1) label = 1 - label; // reversed decision boundary
        inst.target_type = TargetType::ClassIndex;
        inst.class_target = label;
        inst.loss_window = {T_seq - 1, T_seq};
        inst.meta["context"] = std::to_string(context);
        return inst;
    };
    for (int i = 0; i < n_train; ++i) ds.train.push_back(draw());
    for (int i = 0; i < n_test; ++i) ds.test.push_back(draw());
    return ds;
}

EvalResult evaluate(const ModelParams& params, const Readout& readout,
                    const std::vector<TaskInstance>& instances, TaskKind kind) {
    if (kind == TaskKind::Scan)
        throw std::invalid_argument("evaluate: use evaluate_scan for SCAN");
    if (readout.D.cols() != params.M)
        throw std::invalid_argument("evaluate: readout expects M=" +
                                    std::to_string(readout.D.cols()) +
                                    ", model has M=" + std::to_string(params.M));
    double correct = 0.0, total = 0.0, sqerr = 0.0;
    const Vec z0 = Vec::Zero(params.M);
    for (const auto& inst : instances) {
        if (inst.inputs.rows() != params.K)
            throw std::invalid_argument(
                "evaluate: task has K=" + std::to_string(inst.inputs.rows()) +
                ", model expects K=" + std::to_string(params.K));
        Trajectory traj = rollout(params, z0, inst.inputs);
        for (long t = inst.loss_window.begin; t < inst.loss_window.end; ++t) {
            const Vec y = readout_apply(readout, traj.states.col(t));
            switch (inst.target_type) {
                case TargetType::Scalar:
                    sqerr += (y[0] - inst.scalar_target) * (y[0] - inst.scalar_target);
                    total += 1.0;
                    break;
                case TargetType::ClassIndex: {
                    Eigen::Index arg;
                    y.maxCoeff(&arg);
                    correct += arg == inst.class_target ? 1.0 : 0.0;
                    total += 1.0;
                    break;
                }
                case TargetType::ClassSequence: {
                    Eigen::Index arg;
                    y.maxCoeff(&arg);
                    const long idx = t - inst.loss_window.begin;
                    correct += arg == inst.sequence_target[idx] ? 1.0 : 0.0;
                    total += 1.0;
                    break;
                }
            }
        }
    }
    switch (kind) {
        case TaskKind::Copy: return {"symbol_accuracy", correct / total};
        case TaskKind::Addition: return {"mse", sqerr / total};
        case TaskKind::Contextual: return {"accuracy", correct / total};
        default: break;
    }
    throw std::invalid_argument("evaluate: unknown kind");
}

EvalResult evaluate_scan(const ModelParams& enc, const ModelParams& dec,
                         const Readout& dec_readout,
                         const std::vector<TaskInstance>& instances,
                         int max_steps) {
    double correct = 0.0;
    for (const auto& inst : instances) {
        const auto command = scan_tokenize(inst.meta.at("command"));
        const ScanPrediction pred =
            encode_decode_rollout(enc, dec, dec_readout, command, max_steps);
        if (pred.truncated) continue;
        // sequence_target ends with <EOS>; compare the action part exactly.
        const std::size_t n_actions = inst.sequence_target.size() - 1;
        if (pred.actions.size() != n_actions) continue;
        bool match = true;
        const auto& vocab = scan_action_tokens();
        for (std::size_t i = 0; i < n_actions; ++i)
            if (vocab[static_cast<std::size_t>(inst.sequence_target[i])] !=
                pred.actions[i]) {
                match = false;
                break;
            }
        if (match) correct += 1.0;
    }
    return {"sequence_accuracy", correct / static_cast<double>(instances.size())};
}

namespace {

void export_instance(const TaskInstance& inst, long index, std::ostream& out) {
    out << "instance " << index << "\n";
    out << "shape " << inst.inputs.rows() << " " << inst.inputs.cols() << "\n";
    out << "inputs\n";
    const Eigen::IOFormat csv(17, Eigen::DontAlignCols, ",", "\n");
    out << inst.inputs.transpose().format(csv) << "\n";
    out << "window " << inst.loss_window.begin << " " << inst.loss_window.end
        << "\n";
    switch (inst.target_type) {
        case TargetType::ClassIndex:
            out << "target class " << inst.class_target << "\n";
            break;
        case TargetType::Scalar: {
            std::ostringstream s;
            s.precision(17);
            s << inst.scalar_target;
            out << "target scalar " << s.str() << "\n";
            break;
        }
        case TargetType::ClassSequence: {
            out << "target sequence";
            for (long c : inst.sequence_target) out << " " << c;
            out << "\n";
            break;
        }
    }
    for (const auto& [k, v] : inst.meta) out << "meta " << k << " " << v << "\n";
}

} // namespace

void export_dataset(const TaskDataset& dataset, std::ostream& out) {
    out << "alrnn-dataset v1\n";
    out << "task " << task_kind_name(dataset.descriptor.kind) << "\n";
    for (const auto& [k, v] : dataset.descriptor.params)
        out << "param " << k << " " << v << "\n";
    out << "seed " << dataset.seed << "\n";
    out << "counts " << dataset.train.size() << " " << dataset.test.size() << "\n";
    out << "split train\n";
    for (std::size_t i = 0; i < dataset.train.size(); ++i)
        export_instance(dataset.train[i], static_cast<long>(i), out);
    out << "split test\n";
    for (std::size_t i = 0; i < dataset.test.size(); ++i)
        export_instance(dataset.test[i], static_cast<long>(i), out);
}

} // namespace alrnn
