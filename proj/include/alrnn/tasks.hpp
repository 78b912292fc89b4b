#pragma once

// Seeded generators for the synthetic memory benchmarks: copy, addition,
// contextual integration and SCAN. All generators are pure functions of
// their parameters and the seed.

#include "alrnn/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace alrnn {

enum class TaskKind { Copy, Addition, Contextual, Scan };

std::string task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);

enum class TargetType { ClassIndex, Scalar, ClassSequence };

/// Half-open step range [begin, end) over which the loss applies.
struct LossWindow {
    long begin = 0;
    long end = 0;
    long length() const { return end - begin; }
};

struct TaskInstance {
    Mat inputs; // K x T
    TargetType target_type = TargetType::ClassIndex;
    long class_target = 0;               // ClassIndex
    double scalar_target = 0.0;          // Scalar
    std::vector<long> sequence_target;   // ClassSequence, aligned to the window
    LossWindow loss_window;
    std::map<std::string, std::string> meta;

    long T() const { return inputs.cols(); }
};

struct TaskDescriptor {
    TaskKind kind = TaskKind::Copy;
    std::map<std::string, std::string> params;
    int input_dim = 0;  // K
    int output_dim = 0; // O (classes or scalar outputs)
};

struct TaskDataset {
    TaskDescriptor descriptor;
    std::uint64_t seed = 0;
    std::vector<TaskInstance> train;
    std::vector<TaskInstance> test;
};

/// Copy task: n_seq one-hot symbols, a silent delay, a cue step, then
/// n_seq recall steps of zero input. K = n_sym + 1 (last channel is the
/// cue); targets are the symbol indices over the recall window.
TaskDataset gen_copy(int n_sym, int n_seq, int delay, int n_train, int n_test,
                     std::uint64_t seed);

/// Addition problem: channel 0 carries Uniform[0,1] values, channel 1 a
/// binary mask with exactly two distinct positions in the first half.
/// Target is the sum of the two marked values, read out at the last step.
TaskDataset gen_addition(int T, int n_train, int n_test, std::uint64_t seed);

/// Contextual integration: a one-hot context cue on channels 0-1 at the
/// first step, Gaussian(+-drift, 1) evidence on channel 2 throughout.
/// Label is the sign of the cumulative evidence, inverted under context 2.
/// Optionally a fourth channel carries a recall cue at the final step.
TaskDataset gen_contextual(int T_seq, int n_train, int n_test,
                           std::uint64_t seed, double drift = 0.1,
                           bool recall_cue_channel = false);

// ---------------------------------------------------------------------------
// SCAN
// ---------------------------------------------------------------------------

/// Command token vocabulary, in one-hot channel order.
const std::vector<std::string>& scan_command_tokens();

/// Action vocabulary (WALK, RUN, JUMP, LOOK, LTURN, RTURN) plus the
/// trailing end-of-sequence token <EOS>.
const std::vector<std::string>& scan_action_tokens();
int scan_eos_index();

/// Deterministic interpretation of a SCAN command under the canonical
/// phrase-structure grammar. Throws std::invalid_argument naming the
/// offending token on malformed commands.
std::vector<std::string> scan_interpret(const std::vector<std::string>& command);
std::vector<std::string> scan_interpret(const std::string& command);

/// Enumerates the full finite SCAN command space (20,910 commands) in a
/// fixed grammar order.
std::vector<std::string> scan_all_commands();

/// Full-space random 80/20 split; each instance holds the one-hot encoded
/// command and the action-index target sequence terminated by <EOS>.
TaskDataset gen_scan_simple_split(double split_fraction, std::uint64_t seed);

/// The (train, test) index split over the fixed corpus order that
/// gen_scan_simple_split applies. Exposed so the exported split index
/// files are guaranteed to match the in-memory dataset.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
scan_split_indices(double split_fraction, std::uint64_t seed, std::size_t n);

/// Encoder-decoder inference: the encoder consumes the one-hot command,
/// its final state seeds the decoder (equal M, identity mapping), and the
/// decoder free-runs on zero input emitting argmax tokens until <EOS> or
/// the step cap. `truncated` is set when the cap is hit without <EOS>.
struct ScanPrediction {
    std::vector<std::string> actions;
    bool truncated = false;
};
ScanPrediction encode_decode_rollout(const ModelParams& enc,
                                     const ModelParams& dec,
                                     const Readout& dec_readout,
                                     const std::vector<std::string>& command,
                                     int max_steps = 64);

Mat scan_encode_command(const std::vector<std::string>& command);
std::vector<std::string> scan_tokenize(const std::string& command);

// ---------------------------------------------------------------------------
// Evaluation metrics
// ---------------------------------------------------------------------------

struct EvalResult {
    std::string metric_name;
    double value = 0.0;
};

/// Task-appropriate test metric: symbol accuracy (copy), MSE (addition),
/// classification accuracy (contextual). SCAN uses evaluate_scan below.
EvalResult evaluate(const ModelParams& params, const Readout& readout,
                    const std::vector<TaskInstance>& instances,
                    TaskKind kind);

/// Exact-match sequence accuracy over SCAN instances.
EvalResult evaluate_scan(const ModelParams& enc, const ModelParams& dec,
                         const Readout& dec_readout,
                         const std::vector<TaskInstance>& instances,
                         int max_steps = 64);

/// Line-oriented text export for cross-implementation fixture sharing.
void export_dataset(const TaskDataset& dataset, std::ostream& out);

} // namespace alrnn
