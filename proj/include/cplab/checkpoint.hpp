#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cplab/tensor.hpp"

namespace cplab::ckpt {

enum class ModelKind : std::uint32_t { Backbone = 0, Control = 1, Detector = 2 };

std::string kind_to_string(ModelKind k);

/// Binary container: magic "CPLB", format version, model kind, schedule
/// parameters, the producing config's digest, a payload digest, then named
/// float32 little-endian tensors. Loading verifies magic, version, and the
/// payload digest and rejects mismatches.
struct CheckpointMeta {
    ModelKind kind = ModelKind::Backbone;
    std::uint32_t version = 1;
    int schedule_T = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::string config_digest;  // hex
};

struct NamedTensorData {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

struct Checkpoint {
    CheckpointMeta meta;
    std::vector<NamedTensorData> tensors;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<std::pair<std::string, Tensor<float>>>& params);

Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint tensors into the given parameters by name; every
/// parameter must be present with a matching shape, and stray checkpoint
/// tensors are an error.
template <typename S>
void apply_to_params(const Checkpoint& ck,
                     std::vector<std::pair<std::string, Tensor<S>>> params);

}  // namespace cplab::ckpt
