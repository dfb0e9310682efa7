#include "edl/edl_loss.hpp"

#include <algorithm>
#include <cmath>

#include "edl/errors.hpp"
#include "edl/special.hpp"

namespace edl {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "softplus") return Activation::Softplus;
    if (s == "exp") return Activation::Exp;
    if (s == "clamped-exp") return Activation::ClampedExp;
    throw ConfigError("unknown activation '" + s + "' (relu|softplus|exp|clamped-exp)");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Softplus: return "softplus";
        case Activation::Exp: return "exp";
        case Activation::ClampedExp: return "clamped-exp";
    }
    return "?";
}

Tensor evidence(const Tensor& logits, const EvidenceActivation& act) {
    switch (act.kind) {
        case Activation::Relu: return relu(logits);
        case Activation::Softplus: return softplus(logits);
        case Activation::Exp: return exp(logits);
        case Activation::ClampedExp:
            return exp(min_const(logits, act.clamp)) + (logits - detach(logits));
    }
    throw ConfigError("evidence: unknown activation kind");
}

double anneal(const AnnealSchedule& sched) {
    if (sched.epoch < 1) throw ConfigError("anneal: epochs are 1-based");
    if (!(sched.horizon > 0.0)) throw ConfigError("anneal: horizon must be positive");
    return std::min(1.0, static_cast<double>(sched.epoch) / sched.horizon);
}

SseParts sse_bayes_risk(const DirichletParams& alpha, int y) {
    if (y < 0 || y >= alpha.k()) {
        throw ConfigError("sse_bayes_risk: class " + std::to_string(y) +
                          " out of range for K=" + std::to_string(alpha.k()));
    }
    const double a0 = alpha.total();
    SseParts parts{0.0, 0.0, 0.0};
    for (int j = 0; j < alpha.k(); ++j) {
        const double pbar = alpha.alpha[static_cast<std::size_t>(j)] / a0;
        const double yj = j == y ? 1.0 : 0.0;
        parts.err += (yj - pbar) * (yj - pbar);
        parts.var += pbar * (1.0 - pbar) / (1.0 + a0);
    }
    parts.total = parts.err + parts.var;
    return parts;
}

Tensor onehot(const std::vector<int>& labels, int k) {
    const auto n = static_cast<std::int64_t>(labels.size());
    std::vector<double> v(static_cast<std::size_t>(n * k), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        const int lab = labels[static_cast<std::size_t>(i)];
        if (lab < 0 || lab >= k) {
            throw ConfigError("onehot: label " + std::to_string(lab) + " out of range for K=" +
                              std::to_string(k));
        }
        v[static_cast<std::size_t>(i * k + lab)] = 1.0;
    }
    return Tensor::from({n, k}, std::move(v));
}

namespace {

void check_batch(const Tensor& alphas, const std::vector<int>& labels, const char* op) {
    if (alphas.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected [N,K] concentrations, got " +
                         shape_str(alphas.shape()));
    }
    if (alphas.dim(0) == 0) throw ConfigError(std::string(op) + ": empty batch");
    if (static_cast<std::int64_t>(labels.size()) != alphas.dim(0)) {
        throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) +
                         " labels for " + shape_str(alphas.shape()));
    }
}

}  // namespace

Tensor edl_sse_loss(const Tensor& alphas, const std::vector<int>& labels) {
    check_batch(alphas, labels, "edl_sse_loss");
    const int k = static_cast<int>(alphas.dim(1));
    const Tensor y = onehot(labels, k);
    const Tensor a0 = sum_last(alphas);       // [N,1]
    const Tensor pbar = alphas / a0;          // [N,K]
    const Tensor err = square(y - pbar);
    const Tensor var = pbar * (1.0 - pbar) / (a0 + 1.0);
    return sum(err + var);
}

Tensor edl_kl_regularizer(const Tensor& alphas, const std::vector<int>& labels) {
    check_batch(alphas, labels, "edl_kl_regularizer");
    const int k = static_cast<int>(alphas.dim(1));
    const Tensor y = onehot(labels, k);
    const Tensor at = y + (1.0 - y) * alphas;  // misleading evidence kept, true class masked to 1
    const Tensor s = sum_last(at);             // [N,1]
    const Tensor log_beta = sum_last(lgamma(at));
    const Tensor dig = digamma(at) - digamma(s);
    const Tensor weighted = sum_last((at - 1.0) * dig);
    const Tensor kl_rows = lgamma(s) - special::lgamma(static_cast<double>(k)) - log_beta + weighted;
    return sum(kl_rows);
}

Tensor edl_total_loss(const Tensor& alphas, const std::vector<int>& labels,
                      const AnnealSchedule& sched) {
    const double lambda = anneal(sched);
    Tensor loss = edl_sse_loss(alphas, labels);
    if (lambda > 0.0) {
        loss = loss + lambda * edl_kl_regularizer(alphas, labels);
    }
    return loss;
}

}  // namespace edl
