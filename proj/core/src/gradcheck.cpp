#include "edl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "edl/autodiff.hpp"
#include "edl/edl_loss.hpp"
#include "edl/errors.hpp"
#include "edl/risk.hpp"
#include "edl/rng.hpp"

namespace edl {

double gradcheck_max_rel_err(const std::function<Tensor()>& build, std::span<Tensor> inputs,
                             double h) {
    for (auto& in : inputs) in.zero_grad();
    const Tensor root = build();
    backward(root);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) {
        analytic.emplace_back(in.grad().begin(), in.grad().end());
    }

    double worst = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        auto vals = inputs[t].mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + h;
            const double up = build().item();
            vals[i] = saved - h;
            const double down = build().item();
            vals[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = analytic[t][i];
            const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            worst = std::max(worst, err);
        }
    }
    for (auto& in : inputs) in.zero_grad();
    return worst;
}

namespace {

Tensor rand_param(Rng& rng, Shape shape, double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(shape_size(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::param(std::move(shape), std::move(v));
}

// uniform magnitude in [kink + margin, hi], random sign: keeps finite
// differences away from the non-differentiable points
Tensor rand_param_signed(Rng& rng, Shape shape, double margin, double hi) {
    std::vector<double> v(static_cast<std::size_t>(shape_size(shape)));
    for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(margin, hi);
    return Tensor::param(std::move(shape), std::move(v));
}

Tensor rand_weights(Rng& rng, const Shape& shape) {
    std::vector<double> v(static_cast<std::size_t>(shape_size(shape)));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return Tensor::from(Shape(shape), std::move(v));
}

std::vector<int> rand_labels(Rng& rng, std::int64_t n, int k) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& lab : labels) lab = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    return labels;
}

struct Check {
    std::string name;
    // generates inputs and a builder for one random instance
    std::function<double(Rng&)> run;
};

double check_binary(Rng& rng, Tensor (*op)(const Tensor&, const Tensor&), bool broadcast,
                    double lo, double hi) {
    Tensor a = rand_param(rng, {2, 3}, lo, hi);
    Tensor b = broadcast ? rand_param(rng, {3}, lo, hi) : rand_param(rng, {2, 3}, lo, hi);
    const Tensor w = rand_weights(rng, {2, 3});
    std::vector<Tensor> inputs{a, b};
    return gradcheck_max_rel_err([&] { return sum(w * op(a, b)); }, inputs);
}

double check_unary(Rng& rng, Tensor (*op)(const Tensor&), const Tensor& x) {
    Tensor in = x;
    const Tensor w = rand_weights(rng, x.shape());
    std::vector<Tensor> inputs{in};
    return gradcheck_max_rel_err([&] { return sum(w * op(in)); }, inputs);
}

}  // namespace

std::vector<GradCheckResult> run_gradchecks(int instances, std::uint64_t seed, double tolerance) {
    if (instances < 1) throw ConfigError("run_gradchecks: need at least one instance");
    Rng rng(seed);

    std::vector<Check> checks;
    checks.push_back({"add", [](Rng& r) { return check_binary(r, add, r.uniform() < 0.5, -2.0, 2.0); }});
    checks.push_back({"sub", [](Rng& r) { return check_binary(r, sub, r.uniform() < 0.5, -2.0, 2.0); }});
    checks.push_back({"mul", [](Rng& r) { return check_binary(r, mul, r.uniform() < 0.5, -2.0, 2.0); }});
    checks.push_back({"div", [](Rng& r) {
        Tensor a = rand_param(r, {2, 3}, -2.0, 2.0);
        Tensor b = rand_param_signed(r, r.uniform() < 0.5 ? Shape{3} : Shape{2, 3}, 0.5, 2.5);
        const Tensor w = rand_weights(r, {2, 3});
        std::vector<Tensor> inputs{a, b};
        return gradcheck_max_rel_err([&] { return sum(w * (a / b)); }, inputs);
    }});
    checks.push_back({"matmul", [](Rng& r) {
        Tensor a = rand_param(r, {3, 4}, -1.5, 1.5);
        Tensor b = rand_param(r, {4, 2}, -1.5, 1.5);
        const Tensor w = rand_weights(r, {3, 2});
        std::vector<Tensor> inputs{a, b};
        return gradcheck_max_rel_err([&] { return sum(w * matmul(a, b)); }, inputs);
    }});
    checks.push_back({"conv2d-valid", [](Rng& r) {
        Tensor x = rand_param(r, {1, 2, 5, 6}, -1.0, 1.0);
        Tensor k = rand_param(r, {2, 2, 3, 3}, -1.0, 1.0);
        const Tensor w = rand_weights(r, {1, 2, 3, 4});
        std::vector<Tensor> inputs{x, k};
        return gradcheck_max_rel_err([&] { return sum(w * conv2d(x, k, Padding::Valid)); }, inputs);
    }});
    checks.push_back({"conv2d-same", [](Rng& r) {
        Tensor x = rand_param(r, {1, 2, 5, 6}, -1.0, 1.0);
        Tensor k = rand_param(r, {2, 2, 3, 3}, -1.0, 1.0);
        const Tensor w = rand_weights(r, {1, 2, 5, 6});
        std::vector<Tensor> inputs{x, k};
        return gradcheck_max_rel_err([&] { return sum(w * conv2d(x, k, Padding::Same)); }, inputs);
    }});
    checks.push_back({"maxpool2x2", [](Rng& r) {
        // index-staggered values keep window entries well separated
        Shape shape{2, 2, 4, 6};
        std::vector<double> v(static_cast<std::size_t>(shape_size(shape)));
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = r.uniform(0.0, 10.0) + static_cast<double>(i) * 0.017;
        }
        Tensor x = Tensor::param(std::move(shape), std::move(v));
        const Tensor w = rand_weights(r, {2, 2, 2, 3});
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err([&] { return sum(w * maxpool2x2(x)); }, inputs);
    }});
    checks.push_back({"relu", [](Rng& r) {
        return check_unary(r, relu, rand_param_signed(r, {2, 4}, 0.05, 2.0));
    }});
    checks.push_back({"softplus", [](Rng& r) {
        return check_unary(r, softplus, rand_param(r, {2, 4}, -3.0, 3.0));
    }});
    checks.push_back({"exp", [](Rng& r) {
        return check_unary(r, exp, rand_param(r, {2, 4}, -2.0, 2.0));
    }});
    checks.push_back({"log", [](Rng& r) {
        return check_unary(r, log, rand_param(r, {2, 4}, 0.2, 3.0));
    }});
    checks.push_back({"square", [](Rng& r) {
        return check_unary(r, square, rand_param(r, {2, 4}, -2.0, 2.0));
    }});
    checks.push_back({"min_const", [](Rng& r) {
        Tensor x = rand_param(r, {2, 4}, -2.0, 2.0);
        // keep clear of the threshold
        for (auto& v : x.mutable_values()) {
            if (std::abs(v - 0.7) < 0.05) v += 0.2;
        }
        const Tensor w = rand_weights(r, {2, 4});
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err([&] { return sum(w * min_const(x, 0.7)); }, inputs);
    }});
    checks.push_back({"softmax", [](Rng& r) {
        return check_unary(r, softmax, rand_param(r, {3, 5}, -3.0, 3.0));
    }});
    checks.push_back({"sum", [](Rng& r) {
        Tensor x = rand_param(r, {3, 4}, -2.0, 2.0);
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err([&] { return sum(x); }, inputs);
    }});
    checks.push_back({"mean", [](Rng& r) {
        Tensor x = rand_param(r, {3, 4}, -2.0, 2.0);
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err([&] { return mean(x); }, inputs);
    }});
    checks.push_back({"sum_last", [](Rng& r) {
        Tensor x = rand_param(r, {3, 4}, -2.0, 2.0);
        const Tensor w = rand_weights(r, {3, 1});
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err([&] { return sum(w * sum_last(x)); }, inputs);
    }});
    checks.push_back({"gather_rows", [](Rng& r) {
        Tensor x = rand_param(r, {4, 5}, -2.0, 2.0);
        const auto labels = rand_labels(r, 4, 5);
        const Tensor w = rand_weights(r, {4});
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err([&] { return sum(w * gather_rows(x, labels)); }, inputs);
    }});
    checks.push_back({"reshape", [](Rng& r) {
        Tensor x = rand_param(r, {3, 4}, -2.0, 2.0);
        const Tensor w = rand_weights(r, {2, 6});
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err([&] { return sum(w * reshape(x, {2, 6})); }, inputs);
    }});
    checks.push_back({"lgamma", [](Rng& r) {
        return check_unary(r, lgamma, rand_param(r, {2, 4}, 0.3, 8.0));
    }});
    checks.push_back({"digamma", [](Rng& r) {
        return check_unary(r, digamma, rand_param(r, {2, 4}, 0.5, 8.0));
    }});
    checks.push_back({"evidence-clamped-exp", [](Rng& r) {
        // straight-through check: the blocked-gradient branch is held at its
        // unperturbed output, so finite differences see exp(min(x,c)) + x
        const double clamp = 10.0;
        Tensor x = rand_param(r, {2, 4}, 6.0, 14.0);
        for (auto& v : x.mutable_values()) {
            if (std::abs(v - clamp) < 0.05) v += 0.2;
        }
        const Tensor bg0 = detach(x);
        const Tensor w = rand_weights(r, {2, 4});
        std::vector<Tensor> inputs{x};
        return gradcheck_max_rel_err(
            [&] { return sum(w * (exp(min_const(x, clamp)) + (x - bg0))); }, inputs);
    }});
    checks.push_back({"sse-loss", [](Rng& r) {
        Tensor alphas = rand_param(r, {4, 3}, 1.0, 8.0);
        const auto labels = rand_labels(r, 4, 3);
        std::vector<Tensor> inputs{alphas};
        return gradcheck_max_rel_err([&] { return edl_sse_loss(alphas, labels); }, inputs);
    }});
    checks.push_back({"edl-total-loss", [](Rng& r) {
        Tensor alphas = rand_param(r, {4, 3}, 1.0, 8.0);
        const auto labels = rand_labels(r, 4, 3);
        const AnnealSchedule sched{10.0, 3};
        std::vector<Tensor> inputs{alphas};
        return gradcheck_max_rel_err([&] { return edl_total_loss(alphas, labels, sched); }, inputs);
    }});
    checks.push_back({"pignistic-prior", [](Rng& r) {
        const int k = 3, f = 5;
        Tensor g = rand_param(r, {2, f}, -1.5, 1.5);
        Tensor w = rand_param(r, {f, k}, -1.0, 1.0);
        Tensor b = rand_param(r, {k}, -0.5, 0.5);
        const Tensor out_w = rand_weights(r, {2, k});
        std::vector<Tensor> inputs{g, w, b};
        return gradcheck_max_rel_err(
            [&] {
                return sum(out_w * (static_cast<double>(k) * softmax(matmul(g, w) + b)));
            },
            inputs);
    }});
    checks.push_back({"expected-risk", [](Rng& r) {
        const int k = 4;
        std::vector<double> costs(k * k, 0.0);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                if (i != j) costs[static_cast<std::size_t>(i * k + j)] = r.uniform(0.5, 10.0);
            }
        }
        const RiskMatrix rm(k, std::move(costs));
        Tensor c = rand_param(r, {3, k}, 0.1, 5.0);
        Tensor z = rand_param(r, {3, k}, -1.0, 1.0);
        const auto labels = rand_labels(r, 3, k);
        std::vector<Tensor> inputs{c, z};
        return gradcheck_max_rel_err(
            [&] {
                const Tensor gamma = static_cast<double>(k) * softmax(z);
                return expected_risk_batch(c, gamma, labels, rm);
            },
            inputs);
    }});
    checks.push_back({"risk-penalty", [](Rng& r) {
        const int k = 4;
        std::vector<double> costs(k * k, 0.0);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                if (i != j) costs[static_cast<std::size_t>(i * k + j)] = r.uniform(0.5, 10.0);
            }
        }
        const RiskMatrix rm(k, std::move(costs));
        Tensor c = rand_param(r, {3, k}, 0.1, 5.0);
        Tensor z = rand_param(r, {3, k}, -1.0, 1.0);
        const auto labels = rand_labels(r, 3, k);
        std::vector<Tensor> inputs{c, z};
        return gradcheck_max_rel_err(
            [&] {
                const Tensor gamma = static_cast<double>(k) * softmax(z);
                return risk_edl_penalty_batch(c, gamma, labels, rm, 0.01);
            },
            inputs);
    }});
    checks.push_back({"log-policy", [](Rng& r) {
        const int k = 4;
        Tensor c = rand_param(r, {1, k}, 0.1, 5.0);
        Tensor z = rand_param(r, {1, k}, -1.0, 1.0);
        const int action = static_cast<int>(r.below(k));
        std::vector<Tensor> inputs{c, z};
        return gradcheck_max_rel_err(
            [&] {
                const Tensor gamma = static_cast<double>(k) * softmax(z);
                const Tensor alpha = c + gamma;
                const Tensor denom = sum_last(c) + static_cast<double>(k);
                return sum(log(gather_rows(alpha, {action})) - log(denom));
            },
            inputs);
    }});

    std::vector<GradCheckResult> results;
    results.reserve(checks.size());
    for (const auto& check : checks) {
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            worst = std::max(worst, check.run(rng));
        }
        results.push_back({check.name, worst, worst < tolerance});
    }
    return results;
}

}  // namespace edl
