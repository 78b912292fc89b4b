#include "alrnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace alrnn {

LossSpec loss_for_task(TaskKind kind) {
    switch (kind) {
        case TaskKind::Copy: return {LossKind::WindowCrossEntropy};
        case TaskKind::Addition: return {LossKind::FinalSquaredError};
        case TaskKind::Contextual: return {LossKind::FinalCrossEntropy};
        case TaskKind::Scan: return {LossKind::WindowCrossEntropy};
    }
    throw std::invalid_argument("loss_for_task: unknown kind");
}

std::pair<ModelParams, Readout> init_params(int M, int P, int K, int O,
                                            std::uint64_t seed) {
    ModelParams params(M, P, K);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.01);
    for (int i = M - P; i < M; ++i) params.A_diag[i] = gauss(rng);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) params.W(i, j) = gauss(rng);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < K; ++j) params.C(i, j) = gauss(rng);
    for (int i = 0; i < M; ++i) params.h[i] = gauss(rng);
    Readout readout;
    readout.D.resize(O, M);
    for (int i = 0; i < O; ++i)
        for (int j = 0; j < M; ++j) readout.D(i, j) = gauss(rng);
    readout.bias = Vec::Zero(O);
    params.enforce_structure();
    return {std::move(params), std::move(readout)};
}

double mar_loss(const ModelParams& params, int m_reg, double tau) {
    if (m_reg > params.M)
        throw std::invalid_argument("mar_loss: m_reg exceeds M");
    if (tau == 0.0) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < m_reg; ++i) {
        const double eff_diag = params.W(i, i) + (i >= params.M - params.P
                                                      ? params.A_diag[i]
                                                      : 0.0);
        acc += (eff_diag - 1.0) * (eff_diag - 1.0);
        for (int j = 0; j < params.M; ++j)
            if (j != i) acc += params.W(i, j) * params.W(i, j);
        acc += params.h[i] * params.h[i];
    }
    return tau * acc;
}

Gradients Gradients::zero(const ModelParams& params, const Readout& readout) {
    Gradients g;
    g.A_diag = Vec::Zero(params.M);
    g.W = Mat::Zero(params.M, params.M);
    g.C = Mat::Zero(params.M, params.K);
    g.h = Vec::Zero(params.M);
    g.D = Mat::Zero(readout.D.rows(), readout.D.cols());
    g.bias = Vec::Zero(readout.bias.size());
    return g;
}

double Gradients::squared_norm() const {
    return A_diag.squaredNorm() + W.squaredNorm() + C.squaredNorm() +
           h.squaredNorm() + D.squaredNorm() + bias.squaredNorm();
}

void Gradients::scale(double factor) {
    A_diag *= factor;
    W *= factor;
    C *= factor;
    h *= factor;
    D *= factor;
    bias *= factor;
}

namespace {

void add_mar_gradients(const ModelParams& params, int m_reg, double tau,
                       Gradients& g) {
    if (tau == 0.0) return;
    for (int i = 0; i < m_reg; ++i) {
        const bool nonlinear = i >= params.M - params.P;
        const double eff_diag =
            params.W(i, i) + (nonlinear ? params.A_diag[i] : 0.0);
        const double d = 2.0 * tau * (eff_diag - 1.0);
        g.W(i, i) += d;
        if (nonlinear) g.A_diag[i] += d;
        for (int j = 0; j < params.M; ++j)
            if (j != i) g.W(i, j) += 2.0 * tau * params.W(i, j);
        g.h[i] += 2.0 * tau * params.h[i];
    }
}

// phi_star applied columnwise to a state batch.
Mat phi_batch(const Mat& Z, int P) {
    Mat out = Z;
    const long M = Z.rows();
    out.bottomRows(P) = out.bottomRows(P).cwiseMax(0.0);
    (void)M;
    return out;
}

// Derivative mask of phi_star: 1 for linear rows, indicator(z > 0) for
// ReLU rows (subgradient at 0 is 0).
Mat dphi_batch(const Mat& Z, int P) {
    Mat mask = Mat::Ones(Z.rows(), Z.cols());
    mask.bottomRows(P) =
        (Z.bottomRows(P).array() > 0.0).cast<double>().matrix();
    return mask;
}

struct BatchShape {
    long T = 0;
    LossWindow window;
};

BatchShape check_batch(const std::vector<const TaskInstance*>& batch,
                       const ModelParams& params) {
    if (batch.empty())
        throw std::invalid_argument("bptt_gradients: empty batch");
    BatchShape shape{batch.front()->T(), batch.front()->loss_window};
    for (const auto* inst : batch) {
        if (inst->inputs.rows() != params.K)
            throw std::invalid_argument("bptt_gradients: input dim mismatch");
        if (inst->T() != shape.T || inst->loss_window.begin != shape.window.begin ||
            inst->loss_window.end != shape.window.end)
            throw std::invalid_argument(
                "bptt_gradients: batch instances must share length and window");
    }
    return shape;
}

// Softmax columnwise; returns probabilities and accumulates -log p[target].
Mat softmax_columns(const Mat& logits) {
    Mat p = logits;
    for (long c = 0; c < p.cols(); ++c) {
        Vec col = p.col(c);
        const double m = col.maxCoeff();
        col = (col.array() - m).exp();
        p.col(c) = col / col.sum();
    }
    return p;
}

long target_at(const TaskInstance& inst, long t) {
    switch (inst.target_type) {
        case TargetType::ClassIndex: return inst.class_target;
        case TargetType::ClassSequence:
            return inst.sequence_target[static_cast<std::size_t>(
                t - inst.loss_window.begin)];
        default:
            throw std::invalid_argument("target_at: not a classification target");
    }
}

struct ForwardPass {
    std::vector<Mat> Z;  // Z[t] is the state batch after step t; Z[0] = 0
    std::vector<Mat> S;  // S[t] is the input batch fed at step t+1
    double task_loss = 0.0;
    // per-window-step error signals dL/d(logits), already normalized
    std::vector<std::pair<long, Mat>> dY; // (t, O x B)
};

ForwardPass forward_batch(const ModelParams& params, const Readout& readout,
                          const std::vector<const TaskInstance*>& batch,
                          const LossSpec& loss, bool want_grads) {
    const BatchShape shape = check_batch(batch, params);
    const long B = static_cast<long>(batch.size());
    const long T = shape.T;
    ForwardPass fwd;
    fwd.Z.resize(static_cast<std::size_t>(T) + 1);
    fwd.S.resize(static_cast<std::size_t>(T));
    fwd.Z[0] = Mat::Zero(params.M, B);
    const double norm =
        static_cast<double>(B) * static_cast<double>(shape.window.length());
    for (long t = 0; t < T; ++t) {
        Mat S(params.K, B);
        for (long b = 0; b < B; ++b) S.col(b) = batch[b]->inputs.col(t);
        const Mat& Zp = fwd.Z[static_cast<std::size_t>(t)];
        Mat Z = params.A_diag.asDiagonal() * Zp + params.W * phi_batch(Zp, params.P) +
                params.C * S;
        Z.colwise() += params.h;
        fwd.S[static_cast<std::size_t>(t)] = std::move(S);
        fwd.Z[static_cast<std::size_t>(t) + 1] = std::move(Z);
    }
    for (long t = shape.window.begin; t < shape.window.end; ++t) {
        const Mat& Z = fwd.Z[static_cast<std::size_t>(t) + 1];
        Mat logits = readout.D * Z;
        logits.colwise() += readout.bias;
        Mat dY;
        if (loss.kind == LossKind::FinalSquaredError) {
            dY = Mat::Zero(logits.rows(), logits.cols());
            for (long b = 0; b < B; ++b) {
                const double err = logits(0, b) - batch[b]->scalar_target;
                fwd.task_loss += err * err / norm;
                dY(0, b) = 2.0 * err / norm;
            }
        } else {
            const Mat p = softmax_columns(logits);
            dY = p / norm;
            for (long b = 0; b < B; ++b) {
                const long cls = target_at(*batch[b], t);
                fwd.task_loss += -std::log(std::max(p(cls, b), 1e-300)) / norm;
                dY(cls, b) -= 1.0 / norm;
            }
        }
        if (want_grads) fwd.dY.emplace_back(t, std::move(dY));
    }
    return fwd;
}

} // namespace

Gradients bptt_gradients(const ModelParams& params, const Readout& readout,
                         const std::vector<const TaskInstance*>& batch,
                         const LossSpec& loss, double tau, int m_reg) {
    ForwardPass fwd = forward_batch(params, readout, batch, loss, true);
    const double total_loss = fwd.task_loss + mar_loss(params, m_reg, tau);
    if (!std::isfinite(total_loss))
        throw divergence_error("bptt_gradients: non-finite loss", -1);

    Gradients g = Gradients::zero(params, readout);
    g.loss = total_loss;
    const long T = static_cast<long>(fwd.S.size());
    const long B = static_cast<long>(batch.size());
    Mat G = Mat::Zero(params.M, B); // dL/dZ_t carried backwards
    auto dy_it = fwd.dY.rbegin();
    for (long t = T; t >= 1; --t) {
        const Mat& Z = fwd.Z[static_cast<std::size_t>(t)];
        const Mat& Zp = fwd.Z[static_cast<std::size_t>(t) - 1];
        if (dy_it != fwd.dY.rend() && dy_it->first == t - 1) {
            const Mat& dY = dy_it->second;
            g.D.noalias() += dY * Z.transpose();
            g.bias += dY.rowwise().sum();
            G.noalias() += readout.D.transpose() * dY;
            ++dy_it;
        }
        const Mat phi_prev = phi_batch(Zp, params.P);
        g.W.noalias() += G * phi_prev.transpose();
        g.C.noalias() += G * fwd.S[static_cast<std::size_t>(t) - 1].transpose();
        g.h += G.rowwise().sum();
        g.A_diag += G.cwiseProduct(Zp).rowwise().sum();
        const Mat mask = dphi_batch(Zp, params.P);
        G = params.A_diag.asDiagonal() * G +
            mask.cwiseProduct(params.W.transpose() * G);
    }
    // structural constraint: linear units carry no self-connection
    for (int i = 0; i < params.M - params.P; ++i) g.A_diag[i] = 0.0;
    add_mar_gradients(params, m_reg, tau, g);
    return g;
}

double batch_loss(const ModelParams& params, const Readout& readout,
                  const std::vector<const TaskInstance*>& batch,
                  const LossSpec& loss, double tau, int m_reg) {
    const ForwardPass fwd = forward_batch(params, readout, batch, loss, false);
    return fwd.task_loss + mar_loss(params, m_reg, tau);
}

AdamState AdamState::init(const ModelParams& params, const Readout& readout) {
    AdamState s;
    s.m = Gradients::zero(params, readout);
    s.v = Gradients::zero(params, readout);
    return s;
}

namespace {

void adam_update(Vec& param, Vec& m, Vec& v, const Vec& g, double lr,
                 const AdamState& s, double bc1, double bc2) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    param -= lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + s.epsilon).matrix());
}

void adam_update(Mat& param, Mat& m, Mat& v, const Mat& g, double lr,
                 const AdamState& s, double bc1, double bc2) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    param -= lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + s.epsilon).matrix());
}

} // namespace

void adam_step(AdamState& state, ModelParams& params, Readout& readout,
               const Gradients& grads, double lr) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    adam_update(params.A_diag, state.m.A_diag, state.v.A_diag, grads.A_diag, lr,
                state, bc1, bc2);
    adam_update(params.W, state.m.W, state.v.W, grads.W, lr, state, bc1, bc2);
    adam_update(params.C, state.m.C, state.v.C, grads.C, lr, state, bc1, bc2);
    adam_update(params.h, state.m.h, state.v.h, grads.h, lr, state, bc1, bc2);
    adam_update(readout.D, state.m.D, state.v.D, grads.D, lr, state, bc1, bc2);
    adam_update(readout.bias, state.m.bias, state.v.bias, grads.bias, lr, state,
                bc1, bc2);
    params.enforce_structure();
}

double cosine_lr(int epoch, int total_epochs, double base_lr) {
    if (epoch < 0 || epoch > total_epochs)
        throw std::invalid_argument("cosine_lr: epoch out of range");
    const double v = base_lr *
                     (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                     static_cast<double>(total_epochs))) /
                     2.0;
    return std::max(v, 0.0);
}

namespace {

std::vector<const TaskInstance*> gather(const std::vector<TaskInstance>& pool,
                                        const std::vector<std::size_t>& idx,
                                        std::size_t begin, std::size_t end) {
    std::vector<const TaskInstance*> out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) out.push_back(&pool[idx[i]]);
    return out;
}

double loss_over(const ModelParams& params, const Readout& readout,
                 const std::vector<TaskInstance>& pool,
                 const std::vector<std::size_t>& idx, const LossSpec& spec,
                 int batch_size) {
    double acc = 0.0;
    for (std::size_t b = 0; b < idx.size(); b += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(idx.size(), b + static_cast<std::size_t>(batch_size));
        const auto batch = gather(pool, idx, b, end);
        acc += batch_loss(params, readout, batch, spec, 0.0, 0) *
               static_cast<double>(end - b);
    }
    return acc / static_cast<double>(idx.size());
}

} // namespace

TrainResult train(const TaskDataset& dataset, const TrainConfig& config,
                  int M, int P) {
    const int K = dataset.descriptor.input_dim;
    const int O = dataset.descriptor.output_dim;
    const LossSpec spec = loss_for_task(dataset.descriptor.kind);
    const int m_reg = config.resolved_m_reg(M);
    if (m_reg > M) throw std::invalid_argument("train: m_reg exceeds M");

    auto [params, readout] = init_params(M, P, K, O, config.seed);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(config.validation_fraction *
                                        static_cast<double>(order.size()) +
                                    0.5));
    if (n_val >= order.size())
        throw std::invalid_argument("train: validation split leaves no training data");
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
    std::vector<TaskInstance> val_instances;
    for (std::size_t i : val_idx) val_instances.push_back(dataset.train[i]);

    TrainResult best;
    best.params = params;
    best.readout = readout;
    best.log.best_epoch = 0;
    best.log.best_val_loss = loss_over(params, readout, dataset.train, val_idx,
                                       spec, config.batch_size);

    AdamState adam = AdamState::init(params, readout);
    TrainLog log;
    log.best_epoch = 0;
    log.best_val_loss = best.log.best_val_loss;
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, config.epochs, config.learning_rate);
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double train_loss = 0.0;
        long n_batches = 0;
        bool diverged = false;
        for (std::size_t b = 0; b < train_idx.size();
             b += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(
                train_idx.size(), b + static_cast<std::size_t>(config.batch_size));
            const auto batch = gather(dataset.train, train_idx, b, end);
            Gradients g;
            try {
                g = bptt_gradients(params, readout, batch, spec, config.tau, m_reg);
            } catch (const divergence_error&) {
                diverged = true;
                break;
            }
            if (config.grad_clip_norm > 0.0) {
                const double norm = std::sqrt(g.squared_norm());
                if (norm > config.grad_clip_norm)
                    g.scale(config.grad_clip_norm / norm);
            }
            adam_step(adam, params, readout, g, lr);
            train_loss += g.loss;
            ++n_batches;
        }
        if (diverged) {
            log.diverged = true;
            break;
        }
        EpochLog entry;
        entry.epoch = epoch + 1;
        entry.lr = lr;
        entry.train_loss = n_batches > 0 ? train_loss / static_cast<double>(n_batches) : 0.0;
        entry.val_loss = loss_over(params, readout, dataset.train, val_idx, spec,
                                   config.batch_size);
        entry.val_metric =
            evaluate(params, readout, val_instances, dataset.descriptor.kind).value;
        log.epochs.push_back(entry);
        if (std::isfinite(entry.val_loss) && entry.val_loss < log.best_val_loss) {
            log.best_val_loss = entry.val_loss;
            log.best_epoch = entry.epoch;
            best.params = params;
            best.readout = readout;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (config.patience > 0 && epochs_since_best >= config.patience) break;
        }
    }
    best.log.epochs = std::move(log.epochs);
    best.log.best_epoch = log.best_epoch;
    best.log.best_val_loss = log.best_val_loss;
    best.log.diverged = log.diverged;
    best.params.validate();
    return best;
}

void write_training_log(const TrainLog& log, std::ostream& out) {
    out << "epoch,lr,train_loss,val_loss,val_metric\n";
    char buf[256];
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.lr, e.train_loss, e.val_loss, e.val_metric);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// SCAN encoder-decoder training
// ---------------------------------------------------------------------------

namespace {

struct Seq2SeqGrads {
    Gradients enc, dec;
    double loss = 0.0;
};

// Per-instance BPTT through decoder and encoder. The decoder free-runs
// for exactly the target length (including <EOS>) on zero input.
Seq2SeqGrads scan_instance_gradients(const Seq2SeqModel& model,
                                     const TaskInstance& inst) {
    const ModelParams& enc = model.encoder;
    const ModelParams& dec = model.decoder;
    const Readout& ro = model.decoder_readout;
    const long Lc = inst.T();
    const long Lt = static_cast<long>(inst.sequence_target.size());

    Mat Zenc(enc.M, Lc + 1);
    Zenc.col(0).setZero();
    for (long t = 0; t < Lc; ++t)
        Zenc.col(t + 1) = step(enc, Zenc.col(t), inst.inputs.col(t));

    const Vec zero_input = Vec::Zero(dec.K);
    Mat Zdec(dec.M, Lt + 1);
    Zdec.col(0) = Zenc.col(Lc);
    Seq2SeqGrads g;
    g.enc = Gradients::zero(enc, Readout{Mat::Zero(1, enc.M), Vec::Zero(1)});
    g.dec = Gradients::zero(dec, ro);
    std::vector<Vec> dYs(static_cast<std::size_t>(Lt));
    const double norm = static_cast<double>(Lt);
    for (long t = 0; t < Lt; ++t) {
        Zdec.col(t + 1) = step(dec, Zdec.col(t), zero_input);
        Vec logits = readout_apply(ro, Zdec.col(t + 1));
        const double m = logits.maxCoeff();
        Vec p = (logits.array() - m).exp();
        p /= p.sum();
        const long cls = inst.sequence_target[static_cast<std::size_t>(t)];
        g.loss += -std::log(std::max(p[cls], 1e-300)) / norm;
        p /= norm;
        p[cls] -= 1.0 / norm;
        dYs[static_cast<std::size_t>(t)] = std::move(p);
    }
    if (!std::isfinite(g.loss))
        throw divergence_error("train_scan: non-finite loss", -1);

    Vec G = Vec::Zero(dec.M);
    for (long t = Lt; t >= 1; --t) {
        const Vec& dY = dYs[static_cast<std::size_t>(t - 1)];
        g.dec.D.noalias() += dY * Zdec.col(t).transpose();
        g.dec.bias += dY;
        G.noalias() += ro.D.transpose() * dY;
        const Vec zp = Zdec.col(t - 1);
        const Vec phi_prev = phi_star(zp, dec.P);
        g.dec.W.noalias() += G * phi_prev.transpose();
        g.dec.h += G;
        g.dec.A_diag += G.cwiseProduct(zp);
        Vec mask = Vec::Ones(dec.M);
        for (int i = dec.M - dec.P; i < dec.M; ++i) mask[i] = zp[i] > 0.0 ? 1.0 : 0.0;
        G = dec.A_diag.cwiseProduct(G) + mask.cwiseProduct(dec.W.transpose() * G);
    }
    for (int i = 0; i < dec.M - dec.P; ++i) g.dec.A_diag[i] = 0.0;

    // G now carries dL/d(encoder final state)
    for (long t = Lc; t >= 1; --t) {
        const Vec zp = Zenc.col(t - 1);
        const Vec phi_prev = phi_star(zp, enc.P);
        g.enc.W.noalias() += G * phi_prev.transpose();
        g.enc.C.noalias() += G * inst.inputs.col(t - 1).transpose();
        g.enc.h += G;
        g.enc.A_diag += G.cwiseProduct(zp);
        Vec mask = Vec::Ones(enc.M);
        for (int i = enc.M - enc.P; i < enc.M; ++i) mask[i] = zp[i] > 0.0 ? 1.0 : 0.0;
        G = enc.A_diag.cwiseProduct(G) + mask.cwiseProduct(enc.W.transpose() * G);
    }
    for (int i = 0; i < enc.M - enc.P; ++i) g.enc.A_diag[i] = 0.0;
    return g;
}

double scan_loss(const Seq2SeqModel& model, const std::vector<TaskInstance>& pool,
                 const std::vector<std::size_t>& idx) {
    double acc = 0.0;
    for (std::size_t i : idx) {
        const TaskInstance& inst = pool[i];
        const long Lt = static_cast<long>(inst.sequence_target.size());
        Vec z = Vec::Zero(model.encoder.M);
        for (long t = 0; t < inst.T(); ++t)
            z = step(model.encoder, z, inst.inputs.col(t));
        const Vec zero_input = Vec::Zero(model.decoder.K);
        double loss = 0.0;
        for (long t = 0; t < Lt; ++t) {
            z = step(model.decoder, z, zero_input);
            Vec logits = readout_apply(model.decoder_readout, z);
            const double m = logits.maxCoeff();
            Vec p = (logits.array() - m).exp();
            p /= p.sum();
            const long cls = inst.sequence_target[static_cast<std::size_t>(t)];
            loss += -std::log(std::max(p[cls], 1e-300));
        }
        acc += loss / static_cast<double>(Lt);
    }
    return acc / static_cast<double>(idx.size());
}

} // namespace

Seq2SeqResult train_scan(const TaskDataset& dataset, const TrainConfig& config,
                         int M, int P_enc, int P_dec) {
    const int K = dataset.descriptor.input_dim;
    const int O = dataset.descriptor.output_dim;
    Seq2SeqResult result;
    {
        auto [enc, enc_ro] = init_params(M, P_enc, K, 1, config.seed);
        (void)enc_ro;
        auto [dec, dec_ro] = init_params(M, P_dec, 1, O, config.seed + 1);
        result.model.encoder = std::move(enc);
        result.model.decoder = std::move(dec);
        result.model.decoder_readout = std::move(dec_ro);
    }
    const int m_reg = config.resolved_m_reg(M);
    Seq2SeqModel& model = result.model;

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(config.validation_fraction *
                                        static_cast<double>(order.size()) +
                                    0.5));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
    std::vector<TaskInstance> val_instances;
    for (std::size_t i : val_idx) val_instances.push_back(dataset.train[i]);

    AdamState adam_enc = AdamState::init(model.encoder,
                                         Readout{Mat::Zero(1, M), Vec::Zero(1)});
    AdamState adam_dec = AdamState::init(model.decoder, model.decoder_readout);
    Readout enc_dummy{Mat::Zero(1, M), Vec::Zero(1)};

    Seq2SeqModel best_model = model;
    TrainLog log;
    log.best_val_loss = scan_loss(model, dataset.train, val_idx);
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, config.epochs, config.learning_rate);
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double train_loss = 0.0;
        long n_batches = 0;
        bool diverged = false;
        for (std::size_t b = 0; b < train_idx.size();
             b += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(
                train_idx.size(), b + static_cast<std::size_t>(config.batch_size));
            Gradients genc = Gradients::zero(model.encoder, enc_dummy);
            Gradients gdec = Gradients::zero(model.decoder, model.decoder_readout);
            double batch_task_loss = 0.0;
            try {
                for (std::size_t i = b; i < end; ++i) {
                    const Seq2SeqGrads g =
                        scan_instance_gradients(model, dataset.train[train_idx[i]]);
                    const double w = 1.0 / static_cast<double>(end - b);
                    genc.A_diag += w * g.enc.A_diag;
                    genc.W += w * g.enc.W;
                    genc.C += w * g.enc.C;
                    genc.h += w * g.enc.h;
                    gdec.A_diag += w * g.dec.A_diag;
                    gdec.W += w * g.dec.W;
                    gdec.h += w * g.dec.h;
                    gdec.D += w * g.dec.D;
                    gdec.bias += w * g.dec.bias;
                    batch_task_loss += w * g.loss;
                }
            } catch (const divergence_error&) {
                diverged = true;
                break;
            }
            add_mar_gradients(model.encoder, m_reg, config.tau, genc);
            add_mar_gradients(model.decoder, m_reg, config.tau, gdec);
            if (config.grad_clip_norm > 0.0) {
                const double norm =
                    std::sqrt(genc.squared_norm() + gdec.squared_norm());
                if (norm > config.grad_clip_norm) {
                    genc.scale(config.grad_clip_norm / norm);
                    gdec.scale(config.grad_clip_norm / norm);
                }
            }
            adam_step(adam_enc, model.encoder, enc_dummy, genc, lr);
            adam_step(adam_dec, model.decoder, model.decoder_readout, gdec, lr);
            train_loss += batch_task_loss +
                          mar_loss(model.encoder, m_reg, config.tau) +
                          mar_loss(model.decoder, m_reg, config.tau);
            ++n_batches;
        }
        if (diverged) {
            log.diverged = true;
            break;
        }
        EpochLog entry;
        entry.epoch = epoch + 1;
        entry.lr = lr;
        entry.train_loss = n_batches > 0 ? train_loss / static_cast<double>(n_batches) : 0.0;
        entry.val_loss = scan_loss(model, dataset.train, val_idx);
        entry.val_metric = evaluate_scan(model.encoder, model.decoder,
                                         model.decoder_readout, val_instances)
                               .value;
        log.epochs.push_back(entry);
        if (std::isfinite(entry.val_loss) && entry.val_loss < log.best_val_loss) {
            log.best_val_loss = entry.val_loss;
            log.best_epoch = entry.epoch;
            best_model = model;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (config.patience > 0 && epochs_since_best >= config.patience) break;
        }
    }
    result.model = std::move(best_model);
    result.log = std::move(log);
    return result;
}

} // namespace alrnn
