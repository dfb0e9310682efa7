#include "edl/risk.hpp"

#include <cmath>

#include "edl/errors.hpp"

namespace edl {

PignisticPrediction::PignisticPrediction(std::vector<double> c, std::vector<double> g)
    : evidence(std::move(c)), gamma(std::move(g)) {
    if (evidence.size() != gamma.size() || evidence.size() < 2) {
        throw ConfigError("PignisticPrediction: evidence and prior sizes disagree");
    }
    double gsum = 0.0;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (!(evidence[i] >= 0.0)) {
            throw ConfigError("PignisticPrediction: negative evidence c[" + std::to_string(i) + "]");
        }
        if (!(gamma[i] > 0.0)) {
            throw ConfigError("PignisticPrediction: prior gamma[" + std::to_string(i) +
                              "] must be positive");
        }
        gsum += gamma[i];
    }
    if (std::abs(gsum - static_cast<double>(k())) > 1e-9) {
        throw ConfigError("PignisticPrediction: prior counts sum to " + std::to_string(gsum) +
                          ", expected K=" + std::to_string(k()));
    }
}

PignisticPrediction PignisticPrediction::with_uniform_prior(std::vector<double> c) {
    std::vector<double> ones(c.size(), 1.0);
    return PignisticPrediction(std::move(c), std::move(ones));
}

std::vector<double> PignisticPrediction::alpha() const {
    std::vector<double> a(evidence.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = evidence[i] + gamma[i];
    return a;
}

double PignisticPrediction::total_evidence() const {
    double s = 0.0;
    for (double c : evidence) s += c;
    return s;
}

namespace {

void check_matrix(const PignisticPrediction& pred, int y, const RiskMatrix& r, const char* op) {
    if (r.k() != pred.k()) {
        throw ConfigError(std::string(op) + ": risk matrix is " + std::to_string(r.k()) +
                          "x" + std::to_string(r.k()) + " but prediction has K=" +
                          std::to_string(pred.k()));
    }
    if (y < 0 || y >= pred.k()) {
        throw ConfigError(std::string(op) + ": class " + std::to_string(y) + " out of range");
    }
}

}  // namespace

double expected_risk(const PignisticPrediction& pred, int y, const RiskMatrix& r) {
    check_matrix(pred, y, r, "expected_risk");
    const double denom = static_cast<double>(pred.k()) + pred.total_evidence();
    double num = 0.0;
    for (int i = 0; i < pred.k(); ++i) {
        num += r.cost(y, i) * (pred.evidence[static_cast<std::size_t>(i)] +
                               pred.gamma[static_cast<std::size_t>(i)]);
    }
    return num / denom;
}

double risk_edl_penalty(const PignisticPrediction& pred, int y, const RiskMatrix& r,
                        double kappa) {
    check_matrix(pred, y, r, "risk_edl_penalty");
    if (kappa < 0.0) throw ConfigError("risk_edl_penalty: kappa must be non-negative");
    double num = 0.0;
    for (int i = 0; i < pred.k(); ++i) {
        num += r.cost(y, i) * (pred.evidence[static_cast<std::size_t>(i)] +
                               pred.gamma[static_cast<std::size_t>(i)]);
    }
    return kappa * num;
}

SimplexPoint policy(const PignisticPrediction& pred) {
    const double denom = static_cast<double>(pred.k()) + pred.total_evidence();
    std::vector<double> p(pred.evidence.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = (pred.evidence[i] + pred.gamma[i]) / denom;
    }
    return SimplexPoint(std::move(p));
}

int decide(const PignisticPrediction& pred) {
    int best = 0;
    double best_a = pred.evidence[0] + pred.gamma[0];
    for (int i = 1; i < pred.k(); ++i) {
        const double a = pred.evidence[static_cast<std::size_t>(i)] +
                         pred.gamma[static_cast<std::size_t>(i)];
        if (a > best_a) {
            best = i;
            best_a = a;
        }
    }
    return best;
}

namespace {

Tensor risk_rows(const std::vector<int>& labels, const RiskMatrix& r) {
    const auto n = static_cast<std::int64_t>(labels.size());
    const int k = r.k();
    std::vector<double> v(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= k) {
            throw ConfigError("risk batch: class " + std::to_string(y) + " out of range for " +
                              std::to_string(k) + "x" + std::to_string(k) + " matrix");
        }
        for (int j = 0; j < k; ++j) {
            v[static_cast<std::size_t>(i * k + j)] = r.cost(y, j);
        }
    }
    return Tensor::from({n, k}, std::move(v));
}

void check_batch_shapes(const Tensor& evidence, const Tensor& gamma, const std::vector<int>& labels,
                        const char* op) {
    if (evidence.rank() != 2 || gamma.rank() != 2 || evidence.shape() != gamma.shape()) {
        throw ShapeError(std::string(op) + ": evidence " + shape_str(evidence.shape()) +
                         " and prior " + shape_str(gamma.shape()) + " must both be [N,K]");
    }
    if (static_cast<std::int64_t>(labels.size()) != evidence.dim(0)) {
        throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                         shape_str(evidence.shape()));
    }
}

}  // namespace

Tensor expected_risk_batch(const Tensor& evidence, const Tensor& gamma,
                           const std::vector<int>& labels, const RiskMatrix& r) {
    check_batch_shapes(evidence, gamma, labels, "expected_risk_batch");
    const Tensor rr = risk_rows(labels, r);
    const Tensor num = sum_last(rr * (evidence + gamma));                       // [N,1]
    const Tensor denom = sum_last(evidence) + static_cast<double>(r.k());      // [N,1]
    return sum(num / denom);
}

Tensor risk_edl_penalty_batch(const Tensor& evidence, const Tensor& gamma,
                              const std::vector<int>& labels, const RiskMatrix& r, double kappa) {
    check_batch_shapes(evidence, gamma, labels, "risk_edl_penalty_batch");
    if (kappa < 0.0) throw ConfigError("risk_edl_penalty_batch: kappa must be non-negative");
    const Tensor rr = risk_rows(labels, r);
    return kappa * sum(rr * (evidence + gamma));
}

std::vector<PgStep> pg_epoch(EvidenceModel& model, const Dataset& data, const RiskMatrix& r,
                             double lr, Rng& rng) {
    if (!model.has_head()) throw ConfigError("pg_epoch: model has no pignistic head");
    if (!model.backbone_frozen()) {
        throw ConfigError("pg_epoch: backbone and evidence head must be frozen");
    }
    if (r.k() != model.k()) {
        throw ConfigError("pg_epoch: risk matrix K=" + std::to_string(r.k()) +
                          " does not match model K=" + std::to_string(model.k()));
    }
    const std::int64_t n = data.n();
    const int k = model.k();

    // The backbone is frozen, so features and evidence are constants for the
    // whole pass; compute them in batches up front.
    std::vector<double> features;
    std::vector<double> evid;
    features.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(model.feature_dim()));
    evid.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    constexpr std::int64_t kChunk = 256;
    for (std::int64_t start = 0; start < n; start += kChunk) {
        const std::int64_t stop = std::min(n, start + kChunk);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(stop - start));
        for (std::int64_t i = start; i < stop; ++i) idx[static_cast<std::size_t>(i - start)] = i;
        const ModelOutput out = model.forward(data.batch(idx));
        const Tensor c = model.evidence_of(out);
        features.insert(features.end(), out.features.values().begin(), out.features.values().end());
        evid.insert(evid.end(), c.values().begin(), c.values().end());
    }

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);

    Tensor head_w, head_b;
    for (auto& p : model.params()) {
        if (p.name == "head.W") head_w = p.tensor;
        if (p.name == "head.b") head_b = p.tensor;
    }
    const int f = model.feature_dim();

    std::vector<PgStep> steps;
    steps.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i : order) {
        const Tensor g = Tensor::from(
            {1, f}, std::vector<double>(features.begin() + i * f, features.begin() + (i + 1) * f));
        const Tensor c = Tensor::from(
            {1, k}, std::vector<double>(evid.begin() + i * k, evid.begin() + (i + 1) * k));
        const Tensor gamma = static_cast<double>(k) * softmax(matmul(g, head_w) + head_b);
        const Tensor alpha = c + gamma;

        // draw the action from P(i|x)
        double total = 0.0;
        for (double a : alpha.values()) total += a;
        const double u = rng.uniform() * total;
        int action = k - 1;
        double cum = 0.0;
        for (int j = 0; j < k; ++j) {
            cum += alpha.values()[static_cast<std::size_t>(j)];
            if (u < cum) {
                action = j;
                break;
            }
        }

        const int y = data.labels[static_cast<std::size_t>(i)];
        const double cost = r.cost(y, action);  // bandit feedback: the only cost read
        steps.push_back({action, cost});
        if (cost == 0.0) continue;  // zero-cost update is exactly zero

        // log P(action|x) = log alpha_action - log(K + sum c); the second
        // term has no head dependence, so its gradient vanishes.
        const Tensor logp = log(gather_rows(alpha, {action}));
        model.zero_grads();
        backward(logp);
        const double scale = lr * cost;
        auto wvals = head_w.mutable_values();
        const auto wgrad = head_w.grad();
        for (std::size_t j = 0; j < wvals.size(); ++j) wvals[j] -= scale * wgrad[j];
        auto bvals = head_b.mutable_values();
        const auto bgrad = head_b.grad();
        for (std::size_t j = 0; j < bvals.size(); ++j) bvals[j] -= scale * bgrad[j];
    }
    model.zero_grads();
    return steps;
}

}  // namespace edl
