#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bessctl/adam.hpp"
#include "bessctl/tensor.hpp"

namespace bessctl {

// Checkpoint container: one JSON header line
//   {"config": {...}, "tensors": [{"name","shape","offset","nbytes","trainable"}...],
//    "payload_offset": N}
// terminated by '\n', followed by the concatenated little-endian float32
// payloads in header order. Per-tensor offsets are relative to
// payload_offset; the writer is byte-order independent.
struct CheckpointEntry {
    std::string name;
    ad::TensorPtr tensor;
    bool trainable = true;
};

struct Checkpoint {
    nlohmann::json config;
    std::vector<CheckpointEntry> entries;

    ad::TensorPtr find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     const std::vector<CheckpointEntry>& entries);

// throws DataError on missing files, malformed headers or truncated payloads
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bessctl
