#include "alrnn/analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace alrnn {

double BitcodeDistribution::probability(const std::string& key) const {
    const auto it = counts.find(key);
    if (it == counts.end() || total == 0) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(total);
}

BitcodeDistribution bitcode_distribution(const std::vector<Trajectory>& trajectories,
                                         int P, long window_begin,
                                         long window_end) {
    BitcodeDistribution dist;
    dist.P = P;
    for (const auto& traj : trajectories) {
        const long end = window_end < 0 ? traj.length() : window_end;
        if (window_begin < 0 || end > traj.length() || window_begin > end)
            throw std::invalid_argument("bitcode_distribution: window out of bounds");
        for (long t = window_begin; t < end; ++t) {
            ++dist.counts[bitcode_of(traj.states.col(t), P).key()];
            ++dist.total;
        }
    }
    return dist;
}

double gini(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n == 0) throw std::invalid_argument("gini: empty vector");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    if (mean == 0.0) throw std::invalid_argument("gini: zero mean");
    // sorted form of the double sum: sum_i (2i - n + 1) v_(i), 0-based
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += (2.0 * static_cast<double>(i) - static_cast<double>(n) + 1.0) * sorted[i];
    return acc / (static_cast<double>(n) * static_cast<double>(n) * mean);
}

double gini(const BitcodeDistribution& dist, bool include_zeros) {
    std::vector<double> values;
    for (const auto& [key, count] : dist.counts)
        values.push_back(static_cast<double>(count));
    if (include_zeros && dist.P <= 20) {
        const std::size_t cells = std::size_t{1} << dist.P;
        values.resize(cells, 0.0);
    }
    return gini(values);
}

EffectiveRegions effective_regions(const BitcodeDistribution& dist) {
    EffectiveRegions result;
    std::vector<double> probs;
    for (const auto& [key, count] : dist.counts) {
        if (count == 0) continue;
        ++result.occupied;
        probs.push_back(static_cast<double>(count) /
                        static_cast<double>(dist.total));
    }
    const double cells = dist.P < 63 ? std::pow(2.0, dist.P)
                                     : std::numeric_limits<double>::infinity();
    result.theoretical_max = static_cast<std::size_t>(
        std::min(cells, static_cast<double>(dist.total)));
    std::sort(probs.rbegin(), probs.rend());
    double cum = 0.0;
    for (double p : probs) {
        cum += p;
        result.cumulative_mass.push_back(cum);
    }
    return result;
}

double bitcode_entropy(const BitcodeDistribution& dist) {
    double h = 0.0;
    for (const auto& [key, count] : dist.counts) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / static_cast<double>(dist.total);
        h -= p * std::log(p);
    }
    return h;
}

Mat jacobian(const ModelParams& params, const Bitcode& bitcode) {
    if (bitcode.P() != params.P)
        throw std::invalid_argument("jacobian: bitcode length must equal P");
    Mat W_masked = params.W;
    for (int i = 0; i < params.P; ++i)
        if (!bitcode.bits[static_cast<std::size_t>(i)])
            W_masked.col(params.M - params.P + i).setZero();
    Mat J = W_masked;
    J.diagonal() += params.A_diag;
    return J;
}

FixedPointReport fixed_point(const ModelParams& params, const Bitcode& bitcode) {
    FixedPointReport report;
    report.bitcode = bitcode;
    const Mat J = jacobian(params, bitcode);
    Mat system = J;
    system.diagonal().array() -= 1.0;
    Eigen::FullPivLU<Mat> lu(system);
    if (lu.isInvertible()) {
        Vec z_star = lu.solve(-params.h);
        const double residual = (system * z_star + params.h).lpNorm<Eigen::Infinity>();
        if (residual < 1e-8) {
            report.is_virtual = !(bitcode_of(z_star, params.P) == bitcode);
            report.z_star = std::move(z_star);
        }
    }
    Eigen::EigenSolver<Mat> es(J, /*computeEigenvectors=*/false);
    report.eigenvalues = es.eigenvalues();
    report.stable = true;
    for (long i = 0; i < report.eigenvalues.size(); ++i) {
        const double mag = std::abs(report.eigenvalues[i]);
        if (std::abs(mag - 1.0) < 1e-9) report.marginal = true;
        if (mag >= 1.0) report.stable = false;
    }
    return report;
}

std::vector<FixedPointReport> all_fixed_points(const ModelParams& params,
                                               int max_enum_P) {
    if (params.P > max_enum_P)
        throw std::invalid_argument(
            "all_fixed_points: P too large for exhaustive enumeration");
    std::vector<FixedPointReport> reports;
    const std::uint64_t n = std::uint64_t{1} << params.P;
    reports.reserve(n);
    for (std::uint64_t code = 0; code < n; ++code)
        reports.push_back(fixed_point(params, Bitcode::from_value(code, params.P)));
    return reports;
}

double max_lyapunov(const ModelParams& params, const Vec& z0, long n_steps,
                    long discard, long reorth_interval) {
    if (reorth_interval < 1)
        throw std::invalid_argument("max_lyapunov: reorth_interval must be >= 1");
    const Vec zero_input = Vec::Zero(params.K);
    Vec z = z0;
    Mat Q = Mat::Identity(params.M, params.M);
    Mat prod = Q;
    double log_sum = 0.0;
    long counted = 0;
    long since_reorth = 0;
    for (long t = 0; t < n_steps; ++t) {
        // Jacobian at z: diag(A) + W with inactive ReLU columns masked
        Mat J = params.W;
        for (int i = params.M - params.P; i < params.M; ++i)
            if (z[i] <= 0.0) J.col(i).setZero();
        J.diagonal() += params.A_diag;
        if (t >= discard) {
            prod = J * prod;
            ++since_reorth;
            if (since_reorth >= reorth_interval) {
                Eigen::HouseholderQR<Mat> qr(prod);
                const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
                log_sum += std::log(std::abs(R(0, 0)));
                counted += since_reorth;
                prod = qr.householderQ() * Mat::Identity(params.M, params.M);
                since_reorth = 0;
            }
        }
        z = step(params, z, zero_input);
        if (!z.allFinite())
            throw divergence_error("max_lyapunov: trajectory diverged", t);
    }
    if (counted == 0)
        throw std::invalid_argument("max_lyapunov: no steps after discard");
    return log_sum / static_cast<double>(counted);
}

PcaResult pca(const Mat& samples) {
    if (samples.rows() < 2)
        throw std::invalid_argument("pca: need at least 2 samples");
    PcaResult result;
    result.mean = samples.colwise().mean();
    Mat centered = samples.rowwise() - result.mean.transpose();
    Eigen::BDCSVD<Mat> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    result.components = svd.matrixV();
    const Vec sv = svd.singularValues();
    Vec var = sv.cwiseProduct(sv);
    const double total = var.sum();
    result.explained_ratio =
        total > 0.0 ? Vec(var / total) : Vec(Vec::Zero(var.size()));
    result.projections = centered * result.components;
    return result;
}

AlignmentResult eigvec_pc_alignment(const ModelParams& params,
                                    const Bitcode& bitcode, const Mat& states) {
    const Mat J = jacobian(params, bitcode);
    Eigen::EigenSolver<Mat> es(J);
    const Eigen::VectorXcd evals = es.eigenvalues();
    long lead = 0;
    for (long i = 1; i < evals.size(); ++i)
        if (std::abs(evals[i]) > std::abs(evals[lead])) lead = i;
    AlignmentResult result;
    result.leading_magnitude = std::abs(evals[lead]);
    if (std::abs(evals[lead].imag()) > 1e-12 * std::abs(evals[lead])) {
        result.complex_pair = true;
        return result;
    }
    const Vec eigvec = es.eigenvectors().col(lead).real().normalized();
    const Vec pc1 = pca(states).components.col(0);
    result.cosine = std::abs(eigvec.dot(pc1));
    return result;
}

VarianceMetrics variance_metrics(const Mat& final_states,
                                 const std::vector<long>& labels,
                                 double variance_floor) {
    if (final_states.rows() != static_cast<long>(labels.size()))
        throw std::invalid_argument("variance_metrics: label count mismatch");
    std::set<long> classes(labels.begin(), labels.end());
    if (classes.size() < 2)
        throw std::invalid_argument("variance_metrics: need at least 2 classes");

    // dimension-wise normalization
    Mat X = final_states;
    const Vec mean = X.colwise().mean();
    X.rowwise() -= mean.transpose();
    for (long d = 0; d < X.cols(); ++d) {
        const double sd = std::sqrt(X.col(d).squaredNorm() /
                                    static_cast<double>(X.rows()));
        if (sd > 1e-300) X.col(d) /= sd;
    }

    const PcaResult decomposition = pca(X);
    int n_comp = 0;
    double cum = 0.0;
    for (long i = 0; i < decomposition.explained_ratio.size(); ++i) {
        cum += decomposition.explained_ratio[i];
        ++n_comp;
        if (cum >= variance_floor) break;
    }
    const Mat proj = decomposition.projections.leftCols(n_comp);

    VarianceMetrics metrics;
    metrics.n_components = n_comp;
    for (long cls : classes) {
        std::vector<long> rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) rows.push_back(static_cast<long>(i));
        if (rows.size() < 2) {
            metrics.skipped_classes.push_back(cls);
            continue;
        }
        Mat sub(static_cast<long>(rows.size()), proj.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<long>(r)) = proj.row(rows[r]);
        const Vec cm = sub.colwise().mean();
        sub.rowwise() -= cm.transpose();
        metrics.class_variances.push_back(sub.squaredNorm() /
                                          static_cast<double>(rows.size()));
    }
    const auto& v = metrics.class_variances;
    if (v.size() < 2)
        throw std::invalid_argument("variance_metrics: fewer than 2 usable classes");
    const double n = static_cast<double>(v.size());
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= n;
    double var = 0.0;
    for (double x : v) var += (x - mu) * (x - mu);
    var /= n;
    metrics.cv = mu > 0.0 ? std::sqrt(var) / mu : 0.0;
    metrics.gini = gini(v);
    const double vmin = *std::min_element(v.begin(), v.end());
    const double vmax = *std::max_element(v.begin(), v.end());
    metrics.max_min_ratio = vmin > 0.0 ? vmax / vmin
                                       : std::numeric_limits<double>::infinity();
    double total = mu * n;
    double entropy = 0.0;
    for (double x : v) {
        const double p = x / total;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    metrics.entropy = entropy;
    return metrics;
}

FlowField flow_field(const ModelParams& params, const PlaneSpec& plane,
                     int grid) {
    if (grid < 2) throw std::invalid_argument("flow_field: grid must be >= 2");
    Vec base = plane.base.size() == params.M ? plane.base : Vec(Vec::Zero(params.M));
    if (plane.dim_x < 0 || plane.dim_x >= params.M || plane.dim_y < 0 ||
        plane.dim_y >= params.M || plane.dim_x == plane.dim_y)
        throw std::invalid_argument("flow_field: invalid plane dimensions");
    FlowField field;
    field.grid_x.resize(grid, grid);
    field.grid_y.resize(grid, grid);
    field.dx.resize(grid, grid);
    field.dy.resize(grid, grid);
    const Vec zero_input = Vec::Zero(params.K);
    for (int i = 0; i < grid; ++i) {
        const double y = plane.y_min + (plane.y_max - plane.y_min) *
                                           static_cast<double>(i) /
                                           static_cast<double>(grid - 1);
        for (int j = 0; j < grid; ++j) {
            const double x = plane.x_min + (plane.x_max - plane.x_min) *
                                               static_cast<double>(j) /
                                               static_cast<double>(grid - 1);
            Vec z = base;
            z[plane.dim_x] = x;
            z[plane.dim_y] = y;
            const Vec displacement = step(params, z, zero_input) - z;
            field.grid_x(i, j) = x;
            field.grid_y(i, j) = y;
            field.dx(i, j) = displacement[plane.dim_x];
            field.dy(i, j) = displacement[plane.dim_y];
        }
    }
    return field;
}

double subregion_separation_score(const std::vector<Trajectory>& group_a,
                                  const std::vector<Trajectory>& group_b,
                                  int P, long t_probe) {
    auto codes_at = [&](const std::vector<Trajectory>& group) {
        std::vector<std::string> codes;
        for (const auto& traj : group) {
            if (t_probe < 0 || t_probe >= traj.length())
                throw std::invalid_argument(
                    "subregion_separation_score: probe time out of bounds");
            codes.push_back(bitcode_of(traj.states.col(t_probe), P).key());
        }
        return codes;
    };
    const auto a = codes_at(group_a);
    const auto b = codes_at(group_b);
    const std::set<std::string> set_a(a.begin(), a.end());
    const std::set<std::string> set_b(b.begin(), b.end());
    double exclusive = 0.0;
    for (const auto& code : a)
        if (!set_b.count(code)) exclusive += 1.0;
    for (const auto& code : b)
        if (!set_a.count(code)) exclusive += 1.0;
    return exclusive / static_cast<double>(a.size() + b.size());
}

double pearson_correlation(const std::vector<double>& x,
                           const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pearson_correlation: bad input sizes");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace alrnn
