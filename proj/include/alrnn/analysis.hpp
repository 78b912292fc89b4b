#pragma once

// Post-hoc dynamical-systems toolkit: subregion statistics, fixed points
// and stability, Lyapunov exponents, PCA, class-manifold variance metrics
// and flow fields. Everything operates on immutable parameters and
// trajectories.

#include "alrnn/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace alrnn {

/// Empirical distribution of subregion bitcodes, keyed by the canonical
/// bit string so that P > 63 is representable.
struct BitcodeDistribution {
    int P = 0;
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;

    double probability(const std::string& key) const;
};

/// Counts bitcodes of all states within [window_begin, window_end) across
/// all trajectories; a negative window_end means "to the end".
BitcodeDistribution bitcode_distribution(const std::vector<Trajectory>& trajectories,
                                         int P, long window_begin = 0,
                                         long window_end = -1);

/// Gini coefficient of a value vector: sum_ij |v_i - v_j| / (2 N^2 mu).
/// Throws std::invalid_argument when the mean is zero.
double gini(const std::vector<double>& values);

/// Subregion-usage Gini. With include_zeros the support ranges over all
/// 2^P cells; for P > 20 that support is astronomically large and the
/// observed-support variant is computed instead.
double gini(const BitcodeDistribution& dist, bool include_zeros = true);

struct EffectiveRegions {
    std::size_t occupied = 0;
    std::size_t theoretical_max = 0; // min(2^P, total samples)
    std::vector<double> cumulative_mass; // sorted-descending cumulative p
};
EffectiveRegions effective_regions(const BitcodeDistribution& dist);

/// Shannon entropy (natural log) of the bitcode distribution.
double bitcode_entropy(const BitcodeDistribution& dist);

struct FixedPointReport {
    Bitcode bitcode;
    std::optional<Vec> z_star;  // absent when the subregion system is singular
    Eigen::VectorXcd eigenvalues;
    bool stable = false;        // all |lambda| < 1
    bool marginal = false;      // some |lambda| within 1e-9 of 1
    bool is_virtual = false;    // z_star lies outside its defining subregion
};

/// Subregion Jacobian J = diag(A) + W_masked, where W_masked zeroes the
/// columns of inactive ReLU units. A stays unmasked: z_{t-1} enters
/// through A regardless of the ReLU state.
Mat jacobian(const ModelParams& params, const Bitcode& bitcode);

/// Solves (diag(A) + W_masked - I) z* = -h for the given subregion and
/// classifies stability from the Jacobian eigenvalues.
FixedPointReport fixed_point(const ModelParams& params, const Bitcode& bitcode);

/// Fixed points for every subregion (requires P <= max_enum_P, default 16).
std::vector<FixedPointReport> all_fixed_points(const ModelParams& params,
                                               int max_enum_P = 16);

/// Maximum Lyapunov exponent of the autonomous (zero-input) dynamics,
/// estimated by QR-reorthogonalized Jacobian products along a rollout.
/// Throws divergence_error if the trajectory leaves the finite range.
double max_lyapunov(const ModelParams& params, const Vec& z0,
                    long n_steps = 5000, long discard = 500,
                    long reorth_interval = 1);

struct PcaResult {
    Mat components;       // columns are principal axes (M x n_components)
    Vec explained_ratio;  // non-increasing, sums to 1 (all-zero for constant data)
    Mat projections;      // n_samples x n_components scores
    Vec mean;
};

/// Mean-centered SVD of row-sample data (n_samples x dim).
PcaResult pca(const Mat& samples);

struct AlignmentResult {
    bool complex_pair = false; // leading eigenvalue not real
    double cosine = 0.0;       // |cos| between leading eigenvector and PC1
    double leading_magnitude = 0.0;
};

/// Alignment of the leading Jacobian eigenvector with the first PC of the
/// given state samples (rows).
AlignmentResult eigvec_pc_alignment(const ModelParams& params,
                                    const Bitcode& bitcode, const Mat& states);

struct VarianceMetrics {
    double cv = 0.0;
    double gini = 0.0;
    double max_min_ratio = 0.0;
    double entropy = 0.0; // natural log
    std::vector<double> class_variances;
    int n_components = 0;
    std::vector<long> skipped_classes; // classes with < 2 samples
};

/// Dimension-wise normalization, projection onto the smallest PC set
/// reaching >= 80% variance, then dispersion statistics of the per-class
/// variances.
VarianceMetrics variance_metrics(const Mat& final_states,
                                 const std::vector<long>& labels,
                                 double variance_floor = 0.80);

/// 2-D affine slice: grid over coordinates (dim_x, dim_y) with the other
/// coordinates fixed at `base`.
struct PlaneSpec {
    int dim_x = 0, dim_y = 1;
    double x_min = -1.0, x_max = 1.0;
    double y_min = -1.0, y_max = 1.0;
    Vec base; // length M; may be empty for M == 2
};

struct FlowField {
    Mat grid_x, grid_y;           // grid point coordinates
    Mat dx, dy;                   // displacement components at each point
};

/// Zero-input displacement field step(z, 0) - z over an n x n grid.
FlowField flow_field(const ModelParams& params, const PlaneSpec& plane,
                     int grid = 30);

/// Fraction of trials whose bitcode at t_probe is exclusive to its
/// condition group.
double subregion_separation_score(const std::vector<Trajectory>& group_a,
                                  const std::vector<Trajectory>& group_b,
                                  int P, long t_probe);

double pearson_correlation(const std::vector<double>& x,
                           const std::vector<double>& y);

} // namespace alrnn
