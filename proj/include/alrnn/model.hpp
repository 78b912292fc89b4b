#pragma once

// Almost-linear RNN core: parameterization, exact forward dynamics and
// subregion bitcodes. All state is double precision; operations are pure.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace alrnn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when a training run produces a non-finite loss.
class divergence_error : public std::runtime_error {
public:
    divergence_error(const std::string& what, long step)
        : std::runtime_error(what), step_index(step) {}
    long step_index;
};

/// Full AL-RNN parameter set. The first M-P latent units are linear and
/// carry no self-connection in A; the last P units pass through ReLU.
struct ModelParams {
    int M = 0;  // latent dimensionality
    int P = 0;  // number of piecewise-linear units (last P coordinates)
    int K = 0;  // external input dimensionality
    Vec A_diag; // length M, entries 0..M-P-1 identically zero
    Mat W;      // M x M, applied to phi_star(z)
    Mat C;      // M x K
    Vec h;      // length M

    ModelParams() = default;
    ModelParams(int M_, int P_, int K_);

    /// Re-zeroes the linear entries of A_diag. Called after construction
    /// and after every optimizer step.
    void enforce_structure();

    /// Throws std::invalid_argument if shapes or the A-zeroing invariant
    /// are violated, or any entry is non-finite.
    void validate() const;
};

/// Linear readout z -> D z + bias.
struct Readout {
    Mat D;    // O x M
    Vec bias; // length O

    int output_dim() const { return static_cast<int>(D.rows()); }
};

/// Time-indexed latent states with the inputs that produced them.
/// states.col(t) is z_{t+1} of the rollout; inputs.col(t) the input fed
/// at that step.
struct Trajectory {
    Mat states; // M x T
    Mat inputs; // K x T

    long length() const { return states.cols(); }
};

/// P-bit subregion identifier of a latent state. bits[i] is the sign bit
/// of coordinate M-P+i (1 iff strictly positive); value is the big-endian
/// integer reading of bits (only defined for P <= 63).
struct Bitcode {
    std::vector<std::uint8_t> bits;
    std::uint64_t value = 0;

    int P() const { return static_cast<int>(bits.size()); }

    /// Bits as a '0'/'1' string, most significant first. Used as the
    /// canonical map key so that P > 63 works too.
    std::string key() const;

    static Bitcode from_key(const std::string& key);
    static Bitcode from_value(std::uint64_t value, int P);

    bool operator==(const Bitcode& o) const { return bits == o.bits; }
};

/// Applies ReLU to the last P coordinates, leaves the rest untouched.
Vec phi_star(const Vec& z, int P);

/// One step of the AL-RNN map: A.*z + W phi_star(z) + C s + h.
Vec step(const ModelParams& params, const Vec& z_prev, const Vec& s);

/// Iterates `step` over an input sequence (K x T); states.col(t) is the
/// state after consuming inputs.col(t). T = 0 yields an empty trajectory.
Trajectory rollout(const ModelParams& params, const Vec& z0, const Mat& inputs);

/// Subregion bitcode of z: bit i set iff z[M-P+i] > 0 (strict).
Bitcode bitcode_of(const Vec& z, int P);

Vec readout_apply(const Readout& r, const Vec& z);

} // namespace alrnn
