#pragma once

#include <string>
#include <vector>

#include "edl/autodiff.hpp"
#include "edl/dirichlet.hpp"
#include "edl/tensor.hpp"

namespace edl {

enum class Activation { Relu, Softplus, Exp, ClampedExp };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Elementwise non-negative map from logits to evidence.
struct EvidenceActivation {
    Activation kind = Activation::Softplus;
    double clamp = 10.0;  // threshold for ClampedExp
};

// evidence = zeta(logits), differentiable. ClampedExp evaluates to
// exp(min(x, clamp)) with a straight-through term x - detach(x) added so the
// gradient never vanishes in the clamped region.
Tensor evidence(const Tensor& logits, const EvidenceActivation& act);

// lambda_t = min(1, t/T) ramping the KL regularizer; epochs are 1-based.
struct AnnealSchedule {
    double horizon = 10.0;
    int epoch = 1;
};

double anneal(const AnnealSchedule& sched);

// Bayes-risk sum-of-squares loss for one prediction, decomposed into the
// data-fit and variance terms. total = err + var.
struct SseParts {
    double total;
    double err;
    double var;
};

SseParts sse_bayes_risk(const DirichletParams& alpha, int y);

// Batch-summed tensor versions used for training (alphas is [N,K], tracked).
Tensor edl_sse_loss(const Tensor& alphas, const std::vector<int>& labels);
// Sum over the batch of KL(Dir(alpha_tilde_i) || Dir(1)), alpha_tilde formed
// in-graph by masking the true-class concentration to 1.
Tensor edl_kl_regularizer(const Tensor& alphas, const std::vector<int>& labels);
// SSE part + lambda_t * KL part.
Tensor edl_total_loss(const Tensor& alphas, const std::vector<int>& labels,
                      const AnnealSchedule& sched);

// One-hot constant [N,K] for a label vector.
Tensor onehot(const std::vector<int>& labels, int k);

}  // namespace edl
