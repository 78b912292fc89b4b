#include "alrnn/model.hpp"

#include <cmath>

namespace alrnn {

ModelParams::ModelParams(int M_, int P_, int K_) : M(M_), P(P_), K(K_) {
    if (M <= 0) throw std::invalid_argument("ModelParams: M must be positive");
    if (P < 0 || P > M)
        throw std::invalid_argument("ModelParams: P must lie in [0, M]");
    if (K <= 0) throw std::invalid_argument("ModelParams: K must be positive");
    A_diag = Vec::Zero(M);
    W = Mat::Zero(M, M);
    C = Mat::Zero(M, K);
    h = Vec::Zero(M);
}

void ModelParams::enforce_structure() {
    for (int i = 0; i < M - P; ++i) A_diag[i] = 0.0;
}

void ModelParams::validate() const {
    if (M <= 0 || P < 0 || P > M || K <= 0)
        throw std::invalid_argument("ModelParams: invalid dimensions");
    if (A_diag.size() != M || W.rows() != M || W.cols() != M ||
        C.rows() != M || C.cols() != K || h.size() != M)
        throw std::invalid_argument("ModelParams: shape mismatch");
    for (int i = 0; i < M - P; ++i)
        if (A_diag[i] != 0.0)
            throw std::invalid_argument(
                "ModelParams: A_diag entry of a linear unit is nonzero");
    if (!A_diag.allFinite() || !W.allFinite() || !C.allFinite() || !h.allFinite())
        throw std::invalid_argument("ModelParams: non-finite entry");
}

std::string Bitcode::key() const {
    std::string s(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) s[i] = '1';
    return s;
}

Bitcode Bitcode::from_key(const std::string& key) {
    Bitcode b;
    b.bits.resize(key.size());
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (key[i] != '0' && key[i] != '1')
            throw std::invalid_argument("Bitcode: malformed key '" + key + "'");
        b.bits[i] = key[i] == '1' ? 1 : 0;
    }
    if (b.bits.size() <= 63)
        for (std::size_t i = 0; i < b.bits.size(); ++i)
            b.value = (b.value << 1) | b.bits[i];
    return b;
}

Bitcode Bitcode::from_value(std::uint64_t value, int P) {
    if (P < 0 || P > 63)
        throw std::invalid_argument("Bitcode::from_value requires 0 <= P <= 63");
    Bitcode b;
    b.value = value;
    b.bits.resize(P);
    for (int i = 0; i < P; ++i)
        b.bits[i] = static_cast<std::uint8_t>((value >> (P - 1 - i)) & 1u);
    return b;
}

Vec phi_star(const Vec& z, int P) {
    const int M = static_cast<int>(z.size());
    if (P < 0 || P > M)
        throw std::invalid_argument("phi_star: P must lie in [0, M]");
    Vec out = z;
    for (int i = M - P; i < M; ++i) out[i] = std::max(0.0, out[i]);
    return out;
}

Vec step(const ModelParams& params, const Vec& z_prev, const Vec& s) {
    if (z_prev.size() != params.M)
        throw std::invalid_argument("step: state has length " +
                                    std::to_string(z_prev.size()) +
                                    ", expected " + std::to_string(params.M));
    if (s.size() != params.K)
        throw std::invalid_argument("step: input has length " +
                                    std::to_string(s.size()) + ", expected " +
                                    std::to_string(params.K));
    return params.A_diag.cwiseProduct(z_prev) +
           params.W * phi_star(z_prev, params.P) + params.C * s + params.h;
}

Trajectory rollout(const ModelParams& params, const Vec& z0, const Mat& inputs) {
    if (z0.size() != params.M)
        throw std::invalid_argument("rollout: z0 has wrong length");
    if (inputs.cols() > 0 && inputs.rows() != params.K)
        throw std::invalid_argument("rollout: inputs have wrong row count");
    const long T = inputs.cols();
    Trajectory traj;
    traj.states.resize(params.M, T);
    traj.inputs = inputs;
    Vec z = z0;
    for (long t = 0; t < T; ++t) {
        z = step(params, z, inputs.col(t));
        traj.states.col(t) = z;
    }
    return traj;
}

Bitcode bitcode_of(const Vec& z, int P) {
    const int M = static_cast<int>(z.size());
    if (P < 0 || P > M)
        throw std::invalid_argument("bitcode_of: P must lie in [0, M]");
    Bitcode b;
    b.bits.resize(P);
    for (int i = 0; i < P; ++i)
        b.bits[i] = z[M - P + i] > 0.0 ? 1 : 0;
    if (P <= 63)
        for (int i = 0; i < P; ++i) b.value = (b.value << 1) | b.bits[i];
    return b;
}

Vec readout_apply(const Readout& r, const Vec& z) {
    if (z.size() != r.D.cols())
        throw std::invalid_argument("readout_apply: state has length " +
                                    std::to_string(z.size()) + ", expected " +
                                    std::to_string(r.D.cols()));
    return r.D * z + r.bias;
}

} // namespace alrnn
