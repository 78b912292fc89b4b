#pragma once

// Gradient-based training of AL-RNN + readout via full backpropagation
// through time, with manifold attractor regularization, Adam and a cosine
// learning-rate schedule. A single run is single-threaded and fully
// deterministic under its seed.

#include "alrnn/model.hpp"
#include "alrnn/tasks.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace alrnn {

struct TrainConfig {
    double learning_rate = 0.001;
    int epochs = 200;
    int batch_size = 32;
    double tau = 0.1;   // MAR strength
    int m_reg = -1;     // regularized units; -1 means floor(M/2)
    double grad_clip_norm = 10.0; // <= 0 disables clipping
    std::uint64_t seed = 0;
    double validation_fraction = 0.10;
    int patience = 50;  // early stop after this many epochs without val improvement

    int resolved_m_reg(int M) const { return m_reg < 0 ? M / 2 : m_reg; }
};

enum class LossKind { FinalCrossEntropy, WindowCrossEntropy, FinalSquaredError };

struct LossSpec {
    LossKind kind = LossKind::FinalCrossEntropy;
};

/// Task-to-loss binding: copy -> windowed CE, addition -> final squared
/// error, contextual -> final CE, SCAN decoder -> windowed CE.
LossSpec loss_for_task(TaskKind kind);

/// Gaussian(0, 0.01^2) initialization of W, h, C, D and the nonlinear
/// A_diag entries; linear A_diag entries and the readout bias are exactly
/// zero. Deterministic under the seed.
std::pair<ModelParams, Readout> init_params(int M, int P, int K, int O,
                                            std::uint64_t seed);

/// Manifold attractor regularization loss over the first m_reg units:
/// tau * [sum (A~_ii - 1)^2 + sum_offdiag W_ij^2 + sum h_i^2], where the
/// effective diagonal A~_ii is W_ii for linear units and A_i + W_ii for
/// nonlinear ones.
double mar_loss(const ModelParams& params, int m_reg, double tau);

struct Gradients {
    Vec A_diag;
    Mat W, C;
    Vec h;
    Mat D;
    Vec bias;
    double loss = 0.0; // batch task loss + MAR

    static Gradients zero(const ModelParams& params, const Readout& readout);
    double squared_norm() const;
    void scale(double factor);
};

/// Exact gradients of (batch-averaged task loss + MAR) w.r.t. every
/// parameter. The ReLU subgradient at 0 is 0; the A_diag gradient of
/// linear units is pinned to 0. Throws divergence_error on a non-finite
/// loss. All instances in the batch must share the same length and window.
Gradients bptt_gradients(const ModelParams& params, const Readout& readout,
                         const std::vector<const TaskInstance*>& batch,
                         const LossSpec& loss, double tau, int m_reg);

/// Batch loss only (forward pass), same normalization as bptt_gradients.
double batch_loss(const ModelParams& params, const Readout& readout,
                  const std::vector<const TaskInstance*>& batch,
                  const LossSpec& loss, double tau, int m_reg);

struct AdamState {
    Gradients m, v;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

    static AdamState init(const ModelParams& params, const Readout& readout);
};

/// One Adam update; re-zeroes the linear A_diag entries afterwards.
void adam_step(AdamState& state, ModelParams& params, Readout& readout,
               const Gradients& grads, double lr);

/// Cosine annealing: base_lr * (1 + cos(pi * epoch / total)) / 2.
double cosine_lr(int epoch, int total_epochs, double base_lr);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0, train_loss = 0.0, val_loss = 0.0, val_metric = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = 0; // 0 = initialization
    double best_val_loss = 0.0;
    bool diverged = false;
};

struct TrainResult {
    ModelParams params;
    Readout readout;
    TrainLog log;
};

/// Full training run with deterministic validation split, per-epoch cosine
/// schedule, early stopping, and model selection on validation loss. On
/// divergence the best snapshot so far is returned with log.diverged set.
TrainResult train(const TaskDataset& dataset, const TrainConfig& config,
                  int M, int P);

void write_training_log(const TrainLog& log, std::ostream& out);

// ---------------------------------------------------------------------------
// SCAN encoder-decoder training
// ---------------------------------------------------------------------------

struct Seq2SeqModel {
    ModelParams encoder;
    ModelParams decoder; // K = 1, fed zeros during free rollout
    Readout decoder_readout;
};

struct Seq2SeqResult {
    Seq2SeqModel model;
    TrainLog log;
};

/// Trains the dual AL-RNN on SCAN: the encoder consumes the command, its
/// final state seeds the free-running decoder, and per-step cross-entropy
/// (including <EOS>) is backpropagated through both recurrences.
Seq2SeqResult train_scan(const TaskDataset& dataset, const TrainConfig& config,
                         int M, int P_enc, int P_dec);

} // namespace alrnn
