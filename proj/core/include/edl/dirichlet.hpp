#pragma once

#include <vector>

#include "edl/rng.hpp"

namespace edl {

// Concentration vector of a Dirichlet over K >= 2 categories.
// Doubles as the pseudocount posterior alpha = prior + evidence.
struct DirichletParams {
    std::vector<double> alpha;

    explicit DirichletParams(std::vector<double> a);
    int k() const { return static_cast<int>(alpha.size()); }
    double total() const;  // alpha_0
};

// Point on the probability simplex: entries in [0,1] summing to 1 (1e-9).
struct SimplexPoint {
    std::vector<double> p;

    explicit SimplexPoint(std::vector<double> values);
    int k() const { return static_cast<int>(p.size()); }
};

// E[pi_k] = alpha_k / alpha_0; also the marginal p(y=k | alpha).
SimplexPoint mean(const DirichletParams& d);

// V[pi_k] = alpha_k (alpha_0 - alpha_k) / (alpha_0^2 (alpha_0 + 1))
double variance(const DirichletParams& d, int k);

// Entropy (nats) of the predictive categorical distribution, in [0, ln K].
double predictive_entropy(const DirichletParams& d);

// KL( Dir(alpha_tilde) || Dir(1,...,1) ), closed form via lgamma/digamma.
double kl_to_uniform(const DirichletParams& d_tilde);

// alpha_tilde = onehot(y) + (1 - onehot(y)) . alpha: the y-th component
// becomes 1, the misleading components are kept.
DirichletParams remove_misleading(const DirichletParams& alpha, int y);

// Dirichlet over a named label set; used for fusing classifiers trained
// on disjoint category sets.
struct LabeledDirichlet {
    DirichletParams params;
    std::vector<int> labels;  // same length as params.alpha

    LabeledDirichlet(DirichletParams p, std::vector<int> l);
};

// Concatenates concentrations over the union of the (disjoint) label sets.
// Total evidence is preserved: alpha_0(fused) = alpha_0(a) + alpha_0(b).
LabeledDirichlet fuse(const LabeledDirichlet& a, const LabeledDirichlet& b);

// One draw via normalized gamma variates; deterministic under the stream.
SimplexPoint sample(const DirichletParams& d, Rng& rng);

}  // namespace edl
