#include "alrnn/tasks.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace alrnn {

const std::vector<std::string>& scan_command_tokens() {
    static const std::vector<std::string> tokens = {
        "walk", "run",    "jump",   "look",  "turn",  "left", "right",
        "opposite", "around", "twice", "thrice", "and", "after"};
    return tokens;
}

const std::vector<std::string>& scan_action_tokens() {
    static const std::vector<std::string> tokens = {
        "WALK", "RUN", "JUMP", "LOOK", "LTURN", "RTURN", "<EOS>"};
    return tokens;
}

int scan_eos_index() { return 6; }

std::vector<std::string> scan_tokenize(const std::string& command) {
    std::vector<std::string> tokens;
    std::istringstream in(command);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

namespace {

bool is_primitive(const std::string& tok) {
    return tok == "walk" || tok == "run" || tok == "jump" || tok == "look";
}

std::string primitive_action(const std::string& tok) {
    if (tok == "walk") return "WALK";
    if (tok == "run") return "RUN";
    if (tok == "jump") return "JUMP";
    return "LOOK";
}

std::string turn_action(const std::string& dir) {
    return dir == "left" ? "LTURN" : "RTURN";
}

[[noreturn]] void bad_token(const std::string& tok) {
    throw std::invalid_argument("scan_interpret: unexpected token '" + tok + "'");
}

// Verb phrase: (primitive | turn) [(left | right) | (opposite | around)
// (left | right)]. A bare "turn" is not a valid phrase.
std::vector<std::string> parse_verb_phrase(const std::vector<std::string>& toks,
                                           std::size_t& pos) {
    if (pos >= toks.size())
        throw std::invalid_argument("scan_interpret: empty verb phrase");
    const std::string head = toks[pos];
    if (!is_primitive(head) && head != "turn") bad_token(head);
    ++pos;

    std::string modifier; // "", "opposite" or "around"
    std::string dir;
    if (pos < toks.size() &&
        (toks[pos] == "opposite" || toks[pos] == "around")) {
        modifier = toks[pos];
        ++pos;
        if (pos >= toks.size() || (toks[pos] != "left" && toks[pos] != "right"))
            throw std::invalid_argument(
                "scan_interpret: '" + modifier + "' must be followed by a direction");
        dir = toks[pos];
        ++pos;
    } else if (pos < toks.size() && (toks[pos] == "left" || toks[pos] == "right")) {
        dir = toks[pos];
        ++pos;
    }

    std::vector<std::string> body;
    if (is_primitive(head)) body.push_back(primitive_action(head));
    if (head == "turn" && dir.empty()) bad_token("turn");

    if (dir.empty()) return body;
    const std::string turn = turn_action(dir);
    std::vector<std::string> out;
    if (modifier.empty()) {
        out.push_back(turn);
        out.insert(out.end(), body.begin(), body.end());
    } else if (modifier == "opposite") {
        out.push_back(turn);
        out.push_back(turn);
        out.insert(out.end(), body.begin(), body.end());
    } else { // around
        for (int i = 0; i < 4; ++i) {
            out.push_back(turn);
            out.insert(out.end(), body.begin(), body.end());
        }
    }
    return out;
}

std::vector<std::string> parse_scoped(const std::vector<std::string>& toks,
                                      std::size_t& pos) {
    std::vector<std::string> actions = parse_verb_phrase(toks, pos);
    if (pos < toks.size() && (toks[pos] == "twice" || toks[pos] == "thrice")) {
        const int reps = toks[pos] == "twice" ? 2 : 3;
        ++pos;
        std::vector<std::string> repeated;
        for (int i = 0; i < reps; ++i)
            repeated.insert(repeated.end(), actions.begin(), actions.end());
        actions = std::move(repeated);
    }
    return actions;
}

} // namespace

std::vector<std::string> scan_interpret(const std::vector<std::string>& command) {
    std::size_t pos = 0;
    std::vector<std::string> first = parse_scoped(command, pos);
    if (pos == command.size()) return first;
    const std::string op = command[pos];
    if (op != "and" && op != "after") bad_token(op);
    ++pos;
    std::vector<std::string> second = parse_scoped(command, pos);
    if (pos != command.size()) bad_token(command[pos]);
    if (op == "and") {
        first.insert(first.end(), second.begin(), second.end());
        return first;
    }
    // x after y: execute y, then x
    second.insert(second.end(), first.begin(), first.end());
    return second;
}

std::vector<std::string> scan_interpret(const std::string& command) {
    return scan_interpret(scan_tokenize(command));
}

std::vector<std::string> scan_all_commands() {
    std::vector<std::string> phrases; // verb phrases, grammar order
    const std::vector<std::string> prims = {"walk", "run", "jump", "look"};
    const std::vector<std::string> heads = {"walk", "run", "jump", "look", "turn"};
    for (const auto& p : prims) phrases.push_back(p);
    for (const auto& head : heads)
        for (const std::string& mod : {"", "opposite ", "around "})
            for (const std::string& dir : {"left", "right"})
                phrases.push_back(head + " " + mod + dir);

    std::vector<std::string> scoped;
    for (const auto& v : phrases) {
        scoped.push_back(v);
        scoped.push_back(v + " twice");
        scoped.push_back(v + " thrice");
    }

    std::vector<std::string> commands = scoped;
    for (const std::string& op : {"and", "after"})
        for (const auto& a : scoped)
            for (const auto& b : scoped)
                commands.push_back(a + " " + op + " " + b);
    return commands;
}

Mat scan_encode_command(const std::vector<std::string>& command) {
    const auto& vocab = scan_command_tokens();
    Mat inputs = Mat::Zero(static_cast<long>(vocab.size()),
                           static_cast<long>(command.size()));
    for (std::size_t t = 0; t < command.size(); ++t) {
        const auto it = std::find(vocab.begin(), vocab.end(), command[t]);
        if (it == vocab.end())
            throw std::invalid_argument("scan_encode_command: unknown token '" +
                                        command[t] + "'");
        inputs(it - vocab.begin(), static_cast<long>(t)) = 1.0;
    }
    return inputs;
}

TaskDataset gen_scan_simple_split(double split_fraction, std::uint64_t seed) {
    if (split_fraction <= 0.0 || split_fraction >= 1.0)
        throw std::invalid_argument("gen_scan_simple_split: fraction in (0,1)");
    TaskDataset ds;
    ds.seed = seed;
    ds.descriptor.kind = TaskKind::Scan;
    {
        std::ostringstream frac;
        frac << split_fraction;
        ds.descriptor.params = {{"split_fraction", frac.str()}};
    }
    ds.descriptor.input_dim = static_cast<int>(scan_command_tokens().size());
    ds.descriptor.output_dim = static_cast<int>(scan_action_tokens().size());

    const auto commands = scan_all_commands();
    const auto& action_vocab = scan_action_tokens();
    std::vector<TaskInstance> all;
    all.reserve(commands.size());
    for (const auto& cmd : commands) {
        const auto tokens = scan_tokenize(cmd);
        const auto actions = scan_interpret(tokens);
        TaskInstance inst;
        inst.inputs = scan_encode_command(tokens);
        inst.target_type = TargetType::ClassSequence;
        for (const auto& a : actions) {
            const auto it = std::find(action_vocab.begin(), action_vocab.end(), a);
            inst.sequence_target.push_back(it - action_vocab.begin());
        }
        inst.sequence_target.push_back(scan_eos_index());
        inst.loss_window = {0, static_cast<long>(inst.sequence_target.size())};
        inst.meta["command"] = cmd;
        all.push_back(std::move(inst));
    }

    const auto [train_idx, test_idx] =
        scan_split_indices(split_fraction, seed, all.size());
    for (std::size_t i : train_idx) ds.train.push_back(std::move(all[i]));
    for (std::size_t i : test_idx) ds.test.push_back(std::move(all[i]));
    return ds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
scan_split_indices(double split_fraction, std::uint64_t seed, std::size_t n) {
    if (split_fraction <= 0.0 || split_fraction >= 1.0)
        throw std::invalid_argument("scan_split_indices: fraction in (0,1)");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train =
        static_cast<std::size_t>(split_fraction * static_cast<double>(n) + 0.5);
    return {std::vector<std::size_t>(order.begin(), order.begin() + n_train),
            std::vector<std::size_t>(order.begin() + n_train, order.end())};
}

ScanPrediction encode_decode_rollout(const ModelParams& enc,
                                     const ModelParams& dec,
                                     const Readout& dec_readout,
                                     const std::vector<std::string>& command,
                                     int max_steps) {
    if (enc.M != dec.M)
        throw std::invalid_argument(
            "encode_decode_rollout: encoder and decoder M must match");
    const Mat inputs = scan_encode_command(command);
    const Trajectory enc_traj = rollout(enc, Vec::Zero(enc.M), inputs);
    Vec z = enc_traj.length() > 0 ? Vec(enc_traj.states.col(enc_traj.length() - 1))
                                  : Vec(Vec::Zero(enc.M));
    const Vec zero_input = Vec::Zero(dec.K);
    const auto& vocab = scan_action_tokens();
    ScanPrediction pred;
    pred.truncated = true;
    for (int t = 0; t < max_steps; ++t) {
        z = step(dec, z, zero_input);
        const Vec y = readout_apply(dec_readout, z);
        Eigen::Index arg;
        y.maxCoeff(&arg);
        if (arg == scan_eos_index()) {
            pred.truncated = false;
            break;
        }
        pred.actions.push_back(vocab[static_cast<std::size_t>(arg)]);
    }
    return pred;
}

} // namespace alrnn
