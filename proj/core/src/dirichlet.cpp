#include "edl/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "edl/errors.hpp"
#include "edl/special.hpp"

namespace edl {

DirichletParams::DirichletParams(std::vector<double> a) : alpha(std::move(a)) {
    if (alpha.size() < 2) {
        throw ConfigError("DirichletParams: need K >= 2 categories, got " +
                          std::to_string(alpha.size()));
    }
    for (double v : alpha) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError("DirichletParams: concentrations must be positive and finite");
        }
    }
}

double DirichletParams::total() const {
    double s = 0.0;
    for (double v : alpha) s += v;
    return s;
}

SimplexPoint::SimplexPoint(std::vector<double> values) : p(std::move(values)) {
    double s = 0.0;
    for (double v : p) {
        if (v < 0.0 || v > 1.0) {
            throw ConfigError("SimplexPoint: entry " + std::to_string(v) + " outside [0,1]");
        }
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) {
        throw ConfigError("SimplexPoint: entries sum to " + std::to_string(s));
    }
}

SimplexPoint mean(const DirichletParams& d) {
    const double a0 = d.total();
    std::vector<double> p(d.alpha.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = d.alpha[i] / a0;
    return SimplexPoint(std::move(p));
}

double variance(const DirichletParams& d, int k) {
    if (k < 0 || k >= d.k()) {
        throw ConfigError("variance: index " + std::to_string(k) + " out of range for K=" +
                          std::to_string(d.k()));
    }
    const double a0 = d.total();
    const double ak = d.alpha[static_cast<std::size_t>(k)];
    return ak * (a0 - ak) / (a0 * a0 * (a0 + 1.0));
}

double predictive_entropy(const DirichletParams& d) {
    const double a0 = d.total();
    double h = 0.0;
    for (double a : d.alpha) {
        const double p = a / a0;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

double kl_to_uniform(const DirichletParams& d_tilde) {
    const auto& a = d_tilde.alpha;
    const double s = d_tilde.total();
    const double k = static_cast<double>(a.size());
    double kl = special::lgamma(s) - special::lgamma(k);
    const double psi_s = special::digamma(s);
    for (double ai : a) {
        kl -= special::lgamma(ai);
        kl += (ai - 1.0) * (special::digamma(ai) - psi_s);
    }
    return kl;
}

DirichletParams remove_misleading(const DirichletParams& alpha, int y) {
    if (y < 0 || y >= alpha.k()) {
        throw ConfigError("remove_misleading: class " + std::to_string(y) +
                          " out of range for K=" + std::to_string(alpha.k()));
    }
    std::vector<double> out = alpha.alpha;
    out[static_cast<std::size_t>(y)] = 1.0;
    return DirichletParams(std::move(out));
}

LabeledDirichlet::LabeledDirichlet(DirichletParams p, std::vector<int> l)
    : params(std::move(p)), labels(std::move(l)) {
    if (labels.size() != params.alpha.size()) {
        throw ConfigError("LabeledDirichlet: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(params.alpha.size()) +
                          " concentrations");
    }
    std::unordered_set<int> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) {
        throw ConfigError("LabeledDirichlet: duplicate labels in label set");
    }
}

LabeledDirichlet fuse(const LabeledDirichlet& a, const LabeledDirichlet& b) {
    std::unordered_set<int> seen(a.labels.begin(), a.labels.end());
    for (int lab : b.labels) {
        if (seen.count(lab)) {
            throw ConfigError("fuse: label sets overlap at label " + std::to_string(lab));
        }
    }
    std::vector<double> alpha = a.params.alpha;
    alpha.insert(alpha.end(), b.params.alpha.begin(), b.params.alpha.end());
    std::vector<int> labels = a.labels;
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    return LabeledDirichlet(DirichletParams(std::move(alpha)), std::move(labels));
}

SimplexPoint sample(const DirichletParams& d, Rng& rng) {
    std::vector<double> g(d.alpha.size());
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = rng.gamma(d.alpha[i]);
        s += g[i];
    }
    for (auto& v : g) v = std::min(1.0, v / s);
    return SimplexPoint(std::move(g));
}

}  // namespace edl
