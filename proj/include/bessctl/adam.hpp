#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bessctl/tensor.hpp"

namespace bessctl::ad {

struct NamedParam {
    std::string name;
    TensorPtr tensor;
};
using ParamList = std::vector<NamedParam>;

struct AdamConfig {
    double lr = 1e-4;
    double weight_decay = 0.0;  // decoupled, applied before the moment update
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction and decoupled weight decay. Moment buffers are
// float32 like the parameters; the per-element update math runs in double.
// An empty grad buffer is treated as all-zero (tensors never touched by
// backward); a non-finite gradient aborts the whole step before any
// parameter is modified.
class Adam {
public:
    Adam(const ParamList& params, AdamConfig cfg);

    void step(const ParamList& params);

    int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    int64_t step_count_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace bessctl::ad
