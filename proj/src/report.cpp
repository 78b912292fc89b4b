#include "alrnn/analysis.hpp"
#include "alrnn/experiment.hpp"
#include "alrnn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace alrnn {

namespace {

constexpr std::size_t kMaxFixedPointCodes = 4096;

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() +
                                 "' for writing");
    return out;
}

/// Test-set trajectories of the checkpointed model. SCAN decoders are
/// rolled out from the companion encoder's final states.
std::vector<Trajectory> build_trajectories(const Checkpoint& ckpt,
                                           const AnalysisOptions& options,
                                           const TaskDataset& dataset,
                                           std::vector<long>* labels) {
    std::vector<Trajectory> trajectories;
    if (ckpt.task.kind != TaskKind::Scan) {
        for (const auto& inst : dataset.test) {
            trajectories.push_back(
                rollout(ckpt.params, Vec::Zero(ckpt.params.M), inst.inputs));
            if (labels) {
                if (inst.target_type == TargetType::ClassIndex)
                    labels->push_back(inst.class_target);
                else if (inst.target_type == TargetType::ClassSequence &&
                         !inst.sequence_target.empty())
                    labels->push_back(inst.sequence_target.front());
            }
        }
        return trajectories;
    }

    const auto role = ckpt.train_config_echo.find("role");
    const auto companion = ckpt.train_config_echo.find("companion");
    if (role == ckpt.train_config_echo.end() || role->second != "decoder" ||
        companion == ckpt.train_config_echo.end())
        throw std::invalid_argument(
            "analyze: SCAN analysis takes the decoder checkpoint "
            "(role=decoder with a companion encoder)");
    const fs::path base = fs::path(options.checkpoint_path).parent_path();
    const Checkpoint enc = load_checkpoint((base / companion->second).string());

    const std::size_t limit = std::min<std::size_t>(dataset.test.size(), 500);
    const Vec zero_input = Vec::Zero(ckpt.params.K);
    for (std::size_t i = 0; i < limit; ++i) {
        const auto& inst = dataset.test[i];
        const Trajectory enc_traj =
            rollout(enc.params, Vec::Zero(enc.params.M), inst.inputs);
        Vec z = enc_traj.states.col(enc_traj.length() - 1);
        const long T = static_cast<long>(inst.sequence_target.size());
        Trajectory traj;
        traj.states.resize(ckpt.params.M, T);
        traj.inputs = Mat::Zero(ckpt.params.K, T);
        for (long t = 0; t < T; ++t) {
            z = step(ckpt.params, z, zero_input);
            traj.states.col(t) = z;
        }
        trajectories.push_back(std::move(traj));
    }
    return trajectories;
}

Mat stack_states(const std::vector<Trajectory>& trajectories,
                 std::size_t max_rows = 20000) {
    std::size_t total = 0;
    for (const auto& t : trajectories) total += t.length();
    const std::size_t stride = total > max_rows ? (total + max_rows - 1) / max_rows : 1;
    const long M = trajectories.empty() ? 0 : trajectories.front().states.rows();
    std::vector<long> picks;
    std::size_t index = 0;
    for (std::size_t ti = 0; ti < trajectories.size(); ++ti)
        for (long t = 0; t < trajectories[ti].length(); ++t, ++index)
            if (index % stride == 0) picks.push_back(static_cast<long>(ti) << 32 | t);
    Mat samples(static_cast<long>(picks.size()), M);
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const long ti = picks[i] >> 32, t = picks[i] & 0xffffffff;
        samples.row(static_cast<long>(i)) = trajectories[ti].states.col(t).transpose();
    }
    return samples;
}

Mat final_states(const std::vector<Trajectory>& trajectories) {
    const long M = trajectories.empty() ? 0 : trajectories.front().states.rows();
    Mat out(static_cast<long>(trajectories.size()), M);
    for (std::size_t i = 0; i < trajectories.size(); ++i)
        out.row(static_cast<long>(i)) =
            trajectories[i].states.col(trajectories[i].length() - 1).transpose();
    return out;
}

void section_bitcodes(const Checkpoint& ckpt,
                      const std::vector<Trajectory>& trajectories,
                      const AnalysisOptions& options, std::ostream& report) {
    const BitcodeDistribution dist =
        bitcode_distribution(trajectories, ckpt.params.P);
    const EffectiveRegions regions = effective_regions(dist);
    report << "[bitcodes]\n";
    report << "total = " << dist.total << "\n";
    report << "occupied = " << regions.occupied << "\n";
    report << "theoretical_max = " << regions.theoretical_max << "\n";
    report << "entropy = " << format_double(bitcode_entropy(dist)) << "\n";
    if (dist.total > 0) {
        if (ckpt.params.P <= 20)
            report << "gini = " << format_double(gini(dist, true)) << "\n";
        report << "gini_observed = " << format_double(gini(dist, false)) << "\n";
    }
    report << "csv = bitcodes.csv\n";

    std::vector<std::pair<std::string, std::size_t>> sorted(dist.counts.begin(),
                                                            dist.counts.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    auto csv = open_out(fs::path(options.out_dir) / "bitcodes.csv");
    csv << "bitcode,count,probability\n";
    for (const auto& [key, count] : sorted)
        csv << key << "," << count << ","
            << format_double(static_cast<double>(count) /
                             static_cast<double>(dist.total))
            << "\n";

    auto cum_csv = open_out(fs::path(options.out_dir) / "bitcodes_cumulative.csv");
    cum_csv << "rank,cumulative_mass\n";
    for (std::size_t i = 0; i < regions.cumulative_mass.size(); ++i)
        cum_csv << (i + 1) << "," << format_double(regions.cumulative_mass[i])
                << "\n";

    if (options.svg) {
        SvgSeries series;
        for (std::size_t i = 0; i < regions.cumulative_mass.size(); ++i) {
            series.x.push_back(static_cast<double>(i + 1));
            series.y.push_back(regions.cumulative_mass[i]);
        }
        series.label = "cumulative mass";
        svg_plot((fs::path(options.out_dir) / "bitcodes.svg").string(),
                 "Subregion usage", "rank", "cumulative mass", {series});
    }
}

void section_fixed_points(const Checkpoint& ckpt,
                          const std::vector<Trajectory>& trajectories,
                          const AnalysisOptions& options, std::ostream& report) {
    std::vector<FixedPointReport> reports;
    if (ckpt.params.P <= 16) {
        reports = all_fixed_points(ckpt.params);
    } else {
        // Enumerating 2^P subregions is infeasible; fall back to the
        // subregions actually visited by the test trajectories.
        std::set<std::string> keys;
        for (const auto& traj : trajectories)
            for (long t = 0; t < traj.length(); ++t) {
                keys.insert(bitcode_of(traj.states.col(t), ckpt.params.P).key());
                if (keys.size() >= kMaxFixedPointCodes) break;
            }
        for (const auto& key : keys)
            reports.push_back(fixed_point(ckpt.params, Bitcode::from_key(key)));
    }

    std::size_t valid = 0, stable = 0, virt = 0, marginal = 0;
    for (const auto& r : reports) {
        if (!r.z_star) continue;
        ++valid;
        if (r.is_virtual) ++virt;
        else if (r.stable) ++stable;
        if (r.marginal) ++marginal;
    }
    report << "[fixed_points]\n";
    report << "examined = " << reports.size() << "\n";
    report << "enumerated = " << (ckpt.params.P <= 16 ? 1 : 0) << "\n";
    report << "valid = " << valid << "\n";
    report << "stable = " << stable << "\n";
    report << "virtual = " << virt << "\n";
    report << "marginal = " << marginal << "\n";
    report << "csv = fixed_points.csv\n";

    auto csv = open_out(fs::path(options.out_dir) / "fixed_points.csv");
    csv << "bitcode,valid,stable,marginal,virtual,spectral_radius,z_norm\n";
    for (const auto& r : reports) {
        double rho = 0.0;
        for (long i = 0; i < r.eigenvalues.size(); ++i)
            rho = std::max(rho, std::abs(r.eigenvalues[i]));
        csv << r.bitcode.key() << "," << (r.z_star ? 1 : 0) << ","
            << (r.stable ? 1 : 0) << "," << (r.marginal ? 1 : 0) << ","
            << (r.is_virtual ? 1 : 0) << "," << format_double(rho) << ","
            << format_double(r.z_star ? r.z_star->norm() : 0.0) << "\n";
    }
}

void section_lyapunov(const Checkpoint& ckpt,
                      const std::vector<Trajectory>& trajectories,
                      std::ostream& report) {
    Vec z0 = Vec::Zero(ckpt.params.M);
    if (!trajectories.empty() && trajectories.front().length() > 0)
        z0 = trajectories.front().states.col(trajectories.front().length() - 1);
    const long n_steps = 5000, discard = 500;
    const double lambda = max_lyapunov(ckpt.params, z0, n_steps, discard);
    report << "[lyapunov]\n";
    report << "lambda_max = " << format_double(lambda) << "\n";
    report << "n_steps = " << n_steps << "\n";
    report << "discard = " << discard << "\n";
}

void section_pca(const std::vector<Trajectory>& trajectories,
                 const AnalysisOptions& options, std::ostream& report) {
    const Mat samples = stack_states(trajectories);
    const PcaResult result = pca(samples);
    double cumulative = 0.0;
    int n80 = 0;
    for (long i = 0; i < result.explained_ratio.size(); ++i) {
        cumulative += result.explained_ratio[i];
        if (n80 == 0 && cumulative >= 0.80) n80 = static_cast<int>(i) + 1;
    }
    report << "[pca]\n";
    report << "n_samples = " << samples.rows() << "\n";
    report << "n_components_80 = " << n80 << "\n";
    const long shown = std::min<long>(result.explained_ratio.size(), 10);
    for (long i = 0; i < shown; ++i)
        report << "ratio_" << (i + 1) << " = "
               << format_double(result.explained_ratio[i]) << "\n";
    report << "csv = pca.csv\n";

    auto csv = open_out(fs::path(options.out_dir) / "pca.csv");
    csv << "component,explained_ratio,cumulative\n";
    double cum = 0.0;
    for (long i = 0; i < result.explained_ratio.size(); ++i) {
        cum += result.explained_ratio[i];
        csv << (i + 1) << "," << format_double(result.explained_ratio[i]) << ","
            << format_double(cum) << "\n";
    }
    auto proj_csv = open_out(fs::path(options.out_dir) / "pca_projection.csv");
    proj_csv << "pc1,pc2\n";
    const bool has2 = result.projections.cols() >= 2;
    for (long i = 0; i < result.projections.rows(); ++i)
        proj_csv << format_double(result.projections(i, 0)) << ","
                 << format_double(has2 ? result.projections(i, 1) : 0.0) << "\n";

    if (options.svg) {
        SvgSeries scree;
        cum = 0.0;
        for (long i = 0; i < result.explained_ratio.size(); ++i) {
            cum += result.explained_ratio[i];
            scree.x.push_back(static_cast<double>(i + 1));
            scree.y.push_back(cum);
        }
        scree.label = "cumulative ratio";
        svg_plot((fs::path(options.out_dir) / "pca.svg").string(),
                 "PCA explained variance", "component", "cumulative ratio",
                 {scree});
        SvgSeries cloud;
        cloud.points = true;
        for (long i = 0; i < result.projections.rows(); ++i) {
            cloud.x.push_back(result.projections(i, 0));
            cloud.y.push_back(has2 ? result.projections(i, 1) : 0.0);
        }
        svg_plot((fs::path(options.out_dir) / "pca_projection.svg").string(),
                 "State space (PC1/PC2)", "PC1", "PC2", {cloud});
    }
}

void section_flow_field(const Checkpoint& ckpt,
                        const std::vector<Trajectory>& trajectories,
                        const AnalysisOptions& options, std::ostream& report) {
    const Mat samples = stack_states(trajectories);
    int dim_x = options.flow_dim_x, dim_y = options.flow_dim_y;
    if (dim_x < 0 || dim_y < 0) {
        // Pick the two highest-variance coordinates (ties by index).
        const Vec mean = samples.colwise().mean().transpose();
        const Vec var = (samples.rowwise() - mean.transpose())
                            .array()
                            .square()
                            .colwise()
                            .mean()
                            .transpose();
        int best = 0, second = ckpt.params.M > 1 ? 1 : 0;
        for (int i = 1; i < ckpt.params.M; ++i)
            if (var[i] > var[best]) best = i;
        second = best == 0 ? (ckpt.params.M > 1 ? 1 : 0) : 0;
        for (int i = 0; i < ckpt.params.M; ++i)
            if (i != best && var[i] > var[second]) second = i;
        dim_x = std::min(best, second);
        dim_y = std::max(best, second);
    }
    if (dim_x < 0 || dim_y < 0 || dim_x >= ckpt.params.M ||
        dim_y >= ckpt.params.M || dim_x == dim_y)
        throw std::invalid_argument("analyze: invalid flow-field dimensions");

    PlaneSpec plane;
    plane.dim_x = dim_x;
    plane.dim_y = dim_y;
    plane.base = samples.colwise().mean().transpose();
    const auto pad = [](double lo, double hi, double& out_lo, double& out_hi) {
        double span = hi - lo;
        if (span < 1e-12) span = 2.0;
        out_lo = lo - 0.1 * span;
        out_hi = hi + 0.1 * span;
    };
    pad(samples.col(dim_x).minCoeff(), samples.col(dim_x).maxCoeff(),
        plane.x_min, plane.x_max);
    pad(samples.col(dim_y).minCoeff(), samples.col(dim_y).maxCoeff(),
        plane.y_min, plane.y_max);

    const int grid = 30;
    const FlowField field = flow_field(ckpt.params, plane, grid);
    report << "[flow_field]\n";
    report << "dim_x = " << dim_x << "\n";
    report << "dim_y = " << dim_y << "\n";
    report << "grid = " << grid << "\n";
    report << "x_min = " << format_double(plane.x_min) << "\n";
    report << "x_max = " << format_double(plane.x_max) << "\n";
    report << "y_min = " << format_double(plane.y_min) << "\n";
    report << "y_max = " << format_double(plane.y_max) << "\n";
    report << "csv = flow_field.csv\n";

    auto csv = open_out(fs::path(options.out_dir) / "flow_field.csv");
    csv << "x,y,dx,dy\n";
    for (long i = 0; i < field.grid_x.rows(); ++i)
        for (long j = 0; j < field.grid_x.cols(); ++j)
            csv << format_double(field.grid_x(i, j)) << ","
                << format_double(field.grid_y(i, j)) << ","
                << format_double(field.dx(i, j)) << ","
                << format_double(field.dy(i, j)) << "\n";

    if (options.svg) {
        // Scale displacement segments to a fraction of the cell size so
        // the field stays readable.
        double max_len = 0.0;
        for (long i = 0; i < field.dx.rows(); ++i)
            for (long j = 0; j < field.dx.cols(); ++j)
                max_len = std::max(max_len, std::hypot(field.dx(i, j),
                                                       field.dy(i, j)));
        const double cell = (plane.x_max - plane.x_min) / grid;
        const double scale = max_len > 0 ? 0.9 * cell / max_len : 1.0;
        std::vector<SvgSegment> segments;
        for (long i = 0; i < field.grid_x.rows(); ++i)
            for (long j = 0; j < field.grid_x.cols(); ++j)
                segments.push_back({field.grid_x(i, j), field.grid_y(i, j),
                                    field.grid_x(i, j) + scale * field.dx(i, j),
                                    field.grid_y(i, j) + scale * field.dy(i, j)});
        svg_segments((fs::path(options.out_dir) / "flow_field.svg").string(),
                     "Flow field", "z[" + std::to_string(dim_x) + "]",
                     "z[" + std::to_string(dim_y) + "]", segments);
    }
}

void section_variance(const Checkpoint& ckpt,
                      const std::vector<Trajectory>& trajectories,
                      const std::vector<long>& labels,
                      const AnalysisOptions& options, std::ostream& report) {
    if (labels.size() != trajectories.size())
        throw std::invalid_argument(
            "analyze: --variance requires a labeled classification task "
            "(copy or contextual), not " +
            task_kind_name(ckpt.task.kind));
    const Mat finals = final_states(trajectories);
    const VarianceMetrics metrics = variance_metrics(finals, labels);
    report << "[variance]\n";
    report << "n_classes = " << metrics.class_variances.size() << "\n";
    report << "n_components = " << metrics.n_components << "\n";
    report << "cv = " << format_double(metrics.cv) << "\n";
    report << "gini = " << format_double(metrics.gini) << "\n";
    report << "max_min_ratio = " << format_double(metrics.max_min_ratio) << "\n";
    report << "entropy = " << format_double(metrics.entropy) << "\n";
    report << "skipped_classes = " << metrics.skipped_classes.size() << "\n";
    report << "csv = variance.csv\n";

    auto csv = open_out(fs::path(options.out_dir) / "variance.csv");
    csv << "class,variance\n";
    for (std::size_t i = 0; i < metrics.class_variances.size(); ++i)
        csv << i << "," << format_double(metrics.class_variances[i]) << "\n";
}

} // namespace

void run_analysis(const Checkpoint& ckpt, const AnalysisOptions& options,
                  std::ostream& report) {
    if (!options.bitcodes && !options.fixed_points && !options.lyapunov &&
        !options.pca && !options.flow_field && !options.variance)
        throw std::invalid_argument(
            "analyze: select at least one analysis (--bitcodes, "
            "--fixed-points, --lyapunov, --pca, --flow-field, --variance)");
    fs::create_directories(options.out_dir);

    const TaskDataset dataset = make_dataset(ckpt.task, ckpt.data_seed);
    std::vector<long> labels;
    const std::vector<Trajectory> trajectories =
        build_trajectories(ckpt, options, dataset, &labels);

    report << "alrnn-analysis v1\n";
    report << "checkpoint "
           << (options.checkpoint_path.empty() ? "-" : options.checkpoint_path)
           << "\n";
    report << "task " << task_kind_name(ckpt.task.kind) << "\n";
    report << "M " << ckpt.params.M << "\n";
    report << "P " << ckpt.params.P << "\n";

    if (options.bitcodes) section_bitcodes(ckpt, trajectories, options, report);
    if (options.fixed_points)
        section_fixed_points(ckpt, trajectories, options, report);
    if (options.lyapunov) section_lyapunov(ckpt, trajectories, report);
    if (options.pca) section_pca(trajectories, options, report);
    if (options.flow_field)
        section_flow_field(ckpt, trajectories, options, report);
    if (options.variance)
        section_variance(ckpt, trajectories, labels, options, report);
    report << "end\n";
}

namespace {

bool fail(std::string* error, const std::string& message) {
    if (error) *error = message;
    return false;
}

bool known_key(const std::string& section, const std::string& key) {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"bitcodes",
         {"total", "occupied", "theoretical_max", "entropy", "gini",
          "gini_observed", "csv"}},
        {"fixed_points",
         {"examined", "enumerated", "valid", "stable", "virtual", "marginal",
          "csv"}},
        {"lyapunov", {"lambda_max", "n_steps", "discard"}},
        {"pca", {"n_samples", "n_components_80", "csv"}},
        {"flow_field",
         {"dim_x", "dim_y", "grid", "x_min", "x_max", "y_min", "y_max", "csv"}},
        {"variance",
         {"n_classes", "n_components", "cv", "gini", "max_min_ratio", "entropy",
          "skipped_classes", "csv"}},
    };
    const auto it = schema.find(section);
    if (it == schema.end()) return false;
    if (it->second.count(key)) return true;
    // pca lists a variable number of leading ratios
    if (section == "pca" && key.rfind("ratio_", 0) == 0) {
        const std::string index = key.substr(6);
        return !index.empty() &&
               index.find_first_not_of("0123456789") == std::string::npos;
    }
    return false;
}

} // namespace

bool validate_analysis_report(std::istream& in, std::string* error) {
    std::string line;
    if (!std::getline(in, line) || line != "alrnn-analysis v1")
        return fail(error, "missing 'alrnn-analysis v1' header");

    static const std::vector<std::string> preamble = {"checkpoint", "task", "M",
                                                      "P"};
    for (const auto& tag : preamble) {
        if (!std::getline(in, line) || line.rfind(tag + " ", 0) != 0 ||
            line.size() <= tag.size() + 1)
            return fail(error, "expected preamble line '" + tag + " <value>'");
    }

    std::set<std::string> seen;
    std::string section;
    bool ended = false;
    long lineno = 5;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = " (line " + std::to_string(lineno) + ")";
        if (ended && !line.empty())
            return fail(error, "content after 'end'" + where);
        if (line.empty()) continue;
        if (line == "end") {
            ended = true;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']')
                return fail(error, "unterminated section header" + where);
            section = line.substr(1, line.size() - 2);
            if (!known_key(section, "csv") && section != "lyapunov")
                return fail(error, "unknown section '" + section + "'" + where);
            if (!seen.insert(section).second)
                return fail(error, "duplicate section '" + section + "'" + where);
            continue;
        }
        if (section.empty())
            return fail(error, "key outside any section" + where);
        const auto eq = line.find(" = ");
        if (eq == std::string::npos || eq == 0 || eq + 3 >= line.size())
            return fail(error, "expected 'key = value'" + where);
        const std::string key = line.substr(0, eq);
        if (!known_key(section, key))
            return fail(error,
                        "unknown key '" + key + "' in [" + section + "]" + where);
    }
    if (!ended) return fail(error, "missing 'end' marker");
    return true;
}

} // namespace alrnn
