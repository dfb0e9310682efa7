#pragma once

#include <vector>

#include "edl/data.hpp"
#include "edl/dirichlet.hpp"
#include "edl/model.hpp"
#include "edl/risk_matrix.hpp"
#include "edl/rng.hpp"
#include "edl/tensor.hpp"

namespace edl {

// Evidence plus per-sample prior counts; alpha = evidence + gamma.
// gamma sums to K (the head's softmax construction guarantees it).
struct PignisticPrediction {
    std::vector<double> evidence;  // c >= 0
    std::vector<double> gamma;     // > 0, sums to K

    PignisticPrediction(std::vector<double> c, std::vector<double> g);
    // plain evidential prediction: uniform prior of ones
    static PignisticPrediction with_uniform_prior(std::vector<double> c);

    int k() const { return static_cast<int>(evidence.size()); }
    std::vector<double> alpha() const;
    double total_evidence() const;
};

// E[risk] = sum_i R[y][i] (c_i + gamma_i) / (K + sum_j c_j)
double expected_risk(const PignisticPrediction& pred, int y, const RiskMatrix& r);

// kappa * sum_i R[y][i] (c_i + gamma_i): the risk numerator alone, used as
// an additive training penalty (the denominator would reward evidence
// inflation for cheap classes).
double risk_edl_penalty(const PignisticPrediction& pred, int y, const RiskMatrix& r,
                        double kappa = 0.01);

// P(i|x) = (c_i + gamma_i) / (K + sum_j c_j)
SimplexPoint policy(const PignisticPrediction& pred);

// argmax_i (c_i + gamma_i), ties broken toward the lowest index.
int decide(const PignisticPrediction& pred);

// Batch tensor versions for training; evidence and gamma are [N,K].
Tensor expected_risk_batch(const Tensor& evidence, const Tensor& gamma,
                           const std::vector<int>& labels, const RiskMatrix& r);
Tensor risk_edl_penalty_batch(const Tensor& evidence, const Tensor& gamma,
                              const std::vector<int>& labels, const RiskMatrix& r, double kappa);

// One policy-gradient pass over the dataset in a seeded shuffled order:
// draw i ~ P(i|x), then theta <- theta - lr * R[y][i] * grad log P(i|x).
// Only the sampled action's cost is ever read. The backbone and evidence
// head must be frozen; only the pignistic head moves.
struct PgStep {
    int action;
    double cost;
};
std::vector<PgStep> pg_epoch(EvidenceModel& model, const Dataset& data, const RiskMatrix& r,
                             double lr, Rng& rng);

}  // namespace edl
