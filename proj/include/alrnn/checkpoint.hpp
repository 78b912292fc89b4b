#pragma once

// Versioned plain-text checkpoint format. Floats are written with 17
// significant digits so that save -> load -> save is byte-identical.

#include "alrnn/model.hpp"
#include "alrnn/tasks.hpp"
#include "alrnn/train.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace alrnn {

struct Checkpoint {
    int schema_version = 1;
    ModelParams params;
    Readout readout;
    TaskDescriptor task;
    std::uint64_t data_seed = 0;  // seed of the dataset generator
    std::uint64_t train_seed = 0; // seed of the training run
    std::map<std::string, std::string> train_config_echo;
    std::string config_hash; // used by the grid runner to skip completed cells
};

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws std::runtime_error on malformed input; validates shapes and the
/// A-zeroing invariant after loading.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

/// Canonical 17-significant-digit decimal rendering used everywhere a
/// float is persisted.
std::string format_double(double value);

/// FNV-1a hash of a string, rendered as hex. Used for config echoes.
std::string fnv1a_hex(const std::string& text);

} // namespace alrnn
