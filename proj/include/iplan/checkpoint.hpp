#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iplan/tensor.hpp"

namespace iplan::num {

/// Flat, versioned map from canonical parameter names to tensors. Values are
/// written as C99 hex floats so a save/load round-trip is bit-exact.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
    const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws CheckpointVersionError on a bad magic line or unsupported version,
/// Error on any other parse failure.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace iplan::num
