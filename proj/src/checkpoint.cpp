#include "alrnn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace alrnn {

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

void write_vector(std::ostream& out, const std::string& name, const Vec& v) {
    out << name;
    for (long i = 0; i < v.size(); ++i) out << " " << format_double(v[i]);
    out << "\n";
}

void write_matrix(std::ostream& out, const std::string& name, const Mat& m) {
    out << name;
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j) out << " " << format_double(m(i, j));
    out << "\n";
}

Vec read_vector(std::istringstream& line, long n) {
    Vec v(n);
    for (long i = 0; i < n; ++i)
        if (!(line >> v[i]))
            throw std::runtime_error("checkpoint: truncated vector");
    return v;
}

Mat read_matrix(std::istringstream& line, long rows, long cols) {
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j)
            if (!(line >> m(i, j)))
                throw std::runtime_error("checkpoint: truncated matrix");
    return m;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
    out << "alrnn-checkpoint v" << ckpt.schema_version << "\n";
    out << "dims " << ckpt.params.M << " " << ckpt.params.P << " "
        << ckpt.params.K << " " << ckpt.readout.output_dim() << "\n";
    out << "task " << task_kind_name(ckpt.task.kind) << "\n";
    for (const auto& [k, v] : ckpt.task.params) out << "taskparam " << k << " " << v << "\n";
    out << "taskdims " << ckpt.task.input_dim << " " << ckpt.task.output_dim << "\n";
    out << "dataseed " << ckpt.data_seed << "\n";
    out << "trainseed " << ckpt.train_seed << "\n";
    for (const auto& [k, v] : ckpt.train_config_echo)
        out << "trainconfig " << k << " " << v << "\n";
    if (!ckpt.config_hash.empty()) out << "confighash " << ckpt.config_hash << "\n";
    write_vector(out, "A_diag", ckpt.params.A_diag);
    write_matrix(out, "W", ckpt.params.W);
    write_matrix(out, "C", ckpt.params.C);
    write_vector(out, "h", ckpt.params.h);
    write_matrix(out, "D", ckpt.readout.D);
    write_vector(out, "bias", ckpt.readout.bias);
    out << "end\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    save_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(std::istream& in) {
    Checkpoint ckpt;
    std::string line;
    if (!std::getline(in, line) || line.rfind("alrnn-checkpoint v", 0) != 0)
        throw std::runtime_error("checkpoint: missing header");
    ckpt.schema_version = std::stoi(line.substr(18));
    if (ckpt.schema_version != 1)
        throw std::runtime_error("checkpoint: unsupported schema version");
    int M = -1, P = -1, K = -1, O = -1;
    bool have_dims = false, seen_end = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "end") {
            seen_end = true;
            break;
        } else if (tag == "dims") {
            if (!(ls >> M >> P >> K >> O))
                throw std::runtime_error("checkpoint: malformed dims");
            ckpt.params = ModelParams(M, P, K);
            have_dims = true;
        } else if (tag == "task") {
            std::string name;
            ls >> name;
            ckpt.task.kind = task_kind_from_name(name);
        } else if (tag == "taskparam") {
            std::string k, v;
            ls >> k >> v;
            ckpt.task.params[k] = v;
        } else if (tag == "taskdims") {
            ls >> ckpt.task.input_dim >> ckpt.task.output_dim;
        } else if (tag == "dataseed") {
            ls >> ckpt.data_seed;
        } else if (tag == "trainseed") {
            ls >> ckpt.train_seed;
        } else if (tag == "trainconfig") {
            std::string k, v;
            ls >> k >> v;
            ckpt.train_config_echo[k] = v;
        } else if (tag == "confighash") {
            ls >> ckpt.config_hash;
        } else if (tag == "A_diag" || tag == "W" || tag == "C" || tag == "h" ||
                   tag == "D" || tag == "bias") {
            if (!have_dims)
                throw std::runtime_error("checkpoint: arrays before dims");
            if (tag == "A_diag") ckpt.params.A_diag = read_vector(ls, M);
            else if (tag == "W") ckpt.params.W = read_matrix(ls, M, M);
            else if (tag == "C") ckpt.params.C = read_matrix(ls, M, K);
            else if (tag == "h") ckpt.params.h = read_vector(ls, M);
            else if (tag == "D") ckpt.readout.D = read_matrix(ls, O, M);
            else ckpt.readout.bias = read_vector(ls, O);
        } else if (!tag.empty()) {
            throw std::runtime_error("checkpoint: unknown tag '" + tag + "'");
        }
    }
    if (!seen_end) throw std::runtime_error("checkpoint: missing end marker");
    if (!have_dims) throw std::runtime_error("checkpoint: missing dims");
    ckpt.params.validate();
    if (ckpt.readout.D.rows() != O || ckpt.readout.D.cols() != M ||
        ckpt.readout.bias.size() != O)
        throw std::runtime_error("checkpoint: readout shape mismatch");
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return load_checkpoint(in);
}

} // namespace alrnn
