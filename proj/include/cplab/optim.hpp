#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cplab/tensor.hpp"

namespace cplab {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-2;
    double epsilon = 1e-8;
};

/// AdamW with decoupled weight decay: the decay multiplies the weight by
/// exactly (1 - lr*wd) each step and never passes through the moments.
template <typename S>
class AdamW {
public:
    AdamW(std::vector<std::pair<std::string, Tensor<S>>> params, AdamWConfig cfg = {});

    /// One update; every parameter must hold a gradient.
    void step();
    void zero_grad();

    long step_count() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    struct Slot {
        std::string name;
        Tensor<S> param;
        std::vector<S> m, v;
    };
    std::vector<Slot> slots_;
    AdamWConfig cfg_;
    long t_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace cplab
