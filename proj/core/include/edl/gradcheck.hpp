#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edl/tensor.hpp"

namespace edl {

// Central finite differences (default h=1e-5) against the backward pass.
// `build` must rebuild the scalar graph from the current values of `inputs`
// (all tracked); returns the worst scaled relative error
// |fd - analytic| / max(1, |fd|, |analytic|) over all input elements.
double gradcheck_max_rel_err(const std::function<Tensor()>& build, std::span<Tensor> inputs,
                             double h = 1e-5);

struct GradCheckResult {
    std::string name;
    double max_rel_err;
    bool pass;
};

// Runs the finite-difference suite over every autodiff operator and the
// loss/risk heads, `instances` random instances each. Each operator appears
// exactly once in the result list.
std::vector<GradCheckResult> run_gradchecks(int instances = 100, std::uint64_t seed = 20240001,
                                            double tolerance = 1e-4);

}  // namespace edl
