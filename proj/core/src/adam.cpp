#include "edl/adam.hpp"

#include <cmath>

#include "edl/errors.hpp"

namespace edl {

void AdamState::step(std::span<Tensor> params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            m_[p].assign(static_cast<std::size_t>(params[p].size()), 0.0);
            v_[p].assign(static_cast<std::size_t>(params[p].size()), 0.0);
        }
    }
    if (m_.size() != params.size()) {
        throw ConfigError("AdamState::step: parameter count changed between steps");
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p];
        if (!t.tracked()) {
            throw ConfigError("AdamState::step: parameter " + std::to_string(p) +
                              " has no gradient buffer");
        }
        if (m_[p].size() != t.grad().size()) {
            throw ShapeError("AdamState::step: parameter " + std::to_string(p) +
                             " changed shape");
        }
        auto vals = t.mutable_values();
        auto grads = t.mutable_grad();
        for (std::size_t i = 0; i < grads.size(); ++i) {
            const double g = grads[i];
            m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g;
            v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[p][i] / bc1;
            const double vhat = v_[p][i] / bc2;
            vals[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            grads[i] = 0.0;
        }
    }
}

}  // namespace edl
