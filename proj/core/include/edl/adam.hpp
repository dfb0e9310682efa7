#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "edl/tensor.hpp"

namespace edl {

// Adam with bias correction. One state object drives a fixed set of
// parameter tensors; moment buffers are keyed by position.
class AdamState {
public:
    explicit AdamState(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update from the accumulated gradients, then clears them.
    void step(std::span<Tensor> params);

    std::int64_t steps_taken() const { return step_; }
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace edl
