#include <doctest.h>

#include <cmath>
#include <fstream>

#include "edl/data.hpp"
#include "edl/dirichlet.hpp"
#include "edl/errors.hpp"
#include "edl/risk.hpp"
#include "edl/rng.hpp"
#include "edl/train.hpp"

using namespace edl;

namespace {

PignisticPrediction uniform_pred(int k, std::vector<double> c) {
    return PignisticPrediction(std::move(c), std::vector<double>(static_cast<std::size_t>(k), 1.0));
}

// evidence-free model over 2-d inputs: all backbone weights zero, logits
// bias pushed negative so relu evidence is exactly zero
EvidenceModel zero_evidence_model(int k, std::uint64_t seed) {
    EvidenceModel model(BackboneSpec::parse("mlp:4"), {2}, k, Activation::Relu, seed);
    for (auto& p : model.params()) {
        for (auto& v : p.tensor.mutable_values()) v = 0.0;
    }
    for (auto& p : model.params()) {
        if (p.name == "logits.b") {
            for (auto& v : p.tensor.mutable_values()) v = -5.0;
        }
    }
    model.mode = TrainMode::Edl;
    return model;
}

}  // namespace

TEST_CASE("prediction invariants") {
    CHECK_THROWS_AS(PignisticPrediction({1.0, -0.1}, {1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(PignisticPrediction({1.0, 1.0}, {0.5, 0.5}), ConfigError);  // sums to 1, not K
    const PignisticPrediction ok({3.0, 0.0}, {0.5, 1.5});
    CHECK(ok.alpha() == std::vector<double>{3.5, 1.5});
}

TEST_CASE("expected risk: zero matrix, uniform-prior hand value, oracle") {
    const RiskMatrix zero = RiskMatrix::zero(10);
    const PignisticPrediction idle = uniform_pred(10, std::vector<double>(10, 0.0));
    CHECK(expected_risk(idle, 0, zero) == 0.0);

    // c = 0, gamma = ones, K = 10, digit matrix row 0: sum_{j=1..9} j^2 / 10
    const RiskMatrix digit = mnist_risk_matrix(10);
    CHECK(expected_risk(idle, 0, digit) == doctest::Approx(28.5));

    Rng rng(77);
    for (int inst = 0; inst < 10; ++inst) {
        const int k = 3 + static_cast<int>(rng.below(4));
        std::vector<double> c(static_cast<std::size_t>(k));
        for (auto& v : c) v = rng.uniform(0.0, 6.0);
        std::vector<double> z(static_cast<std::size_t>(k));
        for (auto& v : z) v = rng.uniform(-1.0, 1.0);
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double denom = 0.0;
        std::vector<double> gamma(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < gamma.size(); ++i) denom += std::exp(z[i] - zmax);
        for (std::size_t i = 0; i < gamma.size(); ++i) {
            gamma[i] = k * std::exp(z[i] - zmax) / denom;
        }
        std::vector<double> costs(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0.0);
        for (int r = 0; r < k; ++r) {
            for (int cidx = 0; cidx < k; ++cidx) {
                if (r != cidx) {
                    costs[static_cast<std::size_t>(r * k + cidx)] = rng.uniform(0.5, 10.0);
                }
            }
        }
        const RiskMatrix rm(k, costs);
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        const PignisticPrediction pred(c, gamma);
        const double closed = expected_risk(pred, y, rm);

        const DirichletParams d(pred.alpha());
        double acc = 0.0;
        const int draws = 200000;
        for (int i = 0; i < draws; ++i) {
            const SimplexPoint p = sample(d, rng);
            double risk = 0.0;
            for (int j = 0; j < k; ++j) risk += rm.cost(y, j) * p.p[static_cast<std::size_t>(j)];
            acc += risk;
        }
        const double mc = acc / draws;
        CHECK(std::abs(mc - closed) / closed < 1e-2);
    }
}

TEST_CASE("risk penalty: hand value and algebraic identity with expected risk") {
    const RiskMatrix digit = mnist_risk_matrix(10);
    const PignisticPrediction idle = uniform_pred(10, std::vector<double>(10, 0.0));
    CHECK(risk_edl_penalty(idle, 0, digit, 0.01) == doctest::Approx(2.85));
    CHECK(risk_edl_penalty(idle, 0, RiskMatrix::zero(10), 0.01) == 0.0);
    CHECK_THROWS_AS(risk_edl_penalty(idle, 0, digit, -0.5), ConfigError);

    Rng rng(5150);
    std::vector<double> c(10);
    for (auto& v : c) v = rng.uniform(0.0, 4.0);
    const PignisticPrediction pred = uniform_pred(10, c);
    const double kappa = 0.01;
    const double denom = 10.0 + pred.total_evidence();
    CHECK(risk_edl_penalty(pred, 3, digit, kappa) ==
          doctest::Approx(kappa * denom * expected_risk(pred, 3, digit)).epsilon(1e-12));
}

TEST_CASE("policy: zero evidence returns the normalized prior") {
    const PignisticPrediction idle = uniform_pred(3, {0.0, 0.0, 0.0});
    for (double v : policy(idle).p) CHECK(v == doctest::Approx(1.0 / 3.0));

    const PignisticPrediction loaded({6.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    const SimplexPoint p = policy(loaded);
    CHECK(p.p[0] == doctest::Approx(7.0 / 9.0));
    CHECK(p.p[1] == doctest::Approx(1.0 / 9.0));
    CHECK(p.p[2] == doctest::Approx(1.0 / 9.0));
    double total = 0.0;
    for (double v : p.p) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("policy is invariant to shifting the head bias") {
    EvidenceModel model(BackboneSpec::parse("mlp:6"), {2}, 3, Activation::Softplus, 9);
    model.attach_head(HeadInit::Gaussian, 10);
    const Tensor x = Tensor::from({1, 2}, {0.3, -1.2});
    const ModelOutput out = model.forward(x);
    const Tensor gamma0 = model.gamma_of(out);
    const std::vector<double> before(gamma0.values().begin(), gamma0.values().end());
    for (auto& p : model.params()) {
        if (p.name == "head.b") {
            for (auto& v : p.tensor.mutable_values()) v += 7.5;
        }
    }
    const Tensor after = model.gamma_of(model.forward(x));
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(after.values()[i] == doctest::Approx(before[i]).epsilon(1e-9));
    }
}

TEST_CASE("decide: evidence dominance, prior tie-breaks") {
    CHECK(decide(PignisticPrediction({6, 0, 0}, {1, 1, 1})) == 0);
    CHECK(decide(PignisticPrediction({0, 0, 0}, {0.5, 2.0, 0.5})) == 1);
    CHECK(decide(PignisticPrediction({1, 1, 1}, {1, 1, 1})) == 0);  // tie -> lowest index

    // large one-class evidence wins regardless of the prior
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        const int k = 3;
        std::vector<double> z{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                              rng.uniform(-2.0, 2.0)};
        double zmax = std::max({z[0], z[1], z[2]});
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - zmax);
        std::vector<double> gamma(3);
        for (int j = 0; j < 3; ++j) gamma[static_cast<std::size_t>(j)] = 3.0 * std::exp(z[static_cast<std::size_t>(j)] - zmax) / denom;
        std::vector<double> c(3, 0.0);
        const int j = static_cast<int>(rng.below(3));
        c[static_cast<std::size_t>(j)] = 50.0;  // c_j >> K
        CHECK(decide(PignisticPrediction(c, gamma)) == j);
    }
}

TEST_CASE("batch risk tensors agree with the scalar forms") {
    Rng rng(2718);
    const int k = 4;
    const RiskMatrix rm = mnist_risk_matrix(k);
    std::vector<double> c(8), g(8);
    for (auto& v : c) v = rng.uniform(0.0, 5.0);
    // two valid priors summing to k
    for (int row = 0; row < 2; ++row) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) {
            g[static_cast<std::size_t>(row * k + j)] = rng.uniform(0.1, 1.0);
            s += g[static_cast<std::size_t>(row * k + j)];
        }
        for (int j = 0; j < k; ++j) g[static_cast<std::size_t>(row * k + j)] *= k / s;
    }
    const Tensor ct = Tensor::from({2, k}, c);
    const Tensor gt = Tensor::from({2, k}, g);
    const std::vector<int> labels{1, 3};
    double want_risk = 0.0, want_pen = 0.0;
    for (int row = 0; row < 2; ++row) {
        const PignisticPrediction pred(
            std::vector<double>(c.begin() + row * k, c.begin() + (row + 1) * k),
            std::vector<double>(g.begin() + row * k, g.begin() + (row + 1) * k));
        want_risk += expected_risk(pred, labels[static_cast<std::size_t>(row)], rm);
        want_pen += risk_edl_penalty(pred, labels[static_cast<std::size_t>(row)], rm, 0.01);
    }
    CHECK(expected_risk_batch(ct, gt, labels, rm).item() == doctest::Approx(want_risk).epsilon(1e-12));
    CHECK(risk_edl_penalty_batch(ct, gt, labels, rm, 0.01).item() ==
          doctest::Approx(want_pen).epsilon(1e-12));
}

TEST_CASE("pg epoch: zero-cost matrix leaves the head bit-identical") {
    EvidenceModel model = zero_evidence_model(3, 21);
    model.attach_head(HeadInit::Gaussian, 22);
    model.freeze_all_but_head();
    const Dataset data = synth(SyntheticSpec::parse("blobs:K=3,n=30,sigma=0.5,seed=4"));
    const std::string before = model.checksum(true);
    Rng rng(1);
    const auto steps = pg_epoch(model, data, RiskMatrix::zero(3), 0.05, rng);
    CHECK(steps.size() == static_cast<std::size_t>(data.n()));
    CHECK(model.checksum(true) == before);
}

TEST_CASE("pg epoch: a costly action becomes less likely") {
    EvidenceModel model = zero_evidence_model(3, 31);
    model.attach_head(HeadInit::Zero, 0);
    model.freeze_all_but_head();
    // single-sample dataset, every wrong action costly
    Dataset data = synth(SyntheticSpec::parse("blobs:K=3,n=1,sigma=0.0,seed=2"));
    std::vector<double> costs = {0, 4, 4,
                                 4, 0, 4,
                                 4, 4, 0};
    const RiskMatrix rm(3, costs);

    for (int trial = 0; trial < 20; ++trial) {
        EvidenceModel fresh = zero_evidence_model(3, 31);
        fresh.attach_head(HeadInit::Gaussian, 100 + static_cast<std::uint64_t>(trial));
        fresh.freeze_all_but_head();
        Dataset one = data;
        one.values = {data.values[0], data.values[1]};
        one.labels = {data.labels[0]};
        const ModelOutput before_out = fresh.forward(one.batch(std::vector<std::int64_t>{0}));
        const Tensor gb = fresh.gamma_of(before_out);
        const Tensor cb = fresh.evidence_of(before_out);
        const std::vector<double> gamma_before(gb.values().begin(), gb.values().end());
        const std::vector<double> c_before(cb.values().begin(), cb.values().end());
        Rng rng(static_cast<std::uint64_t>(trial));
        const auto steps = pg_epoch(fresh, one, rm, 0.05, rng);
        REQUIRE(steps.size() == 1);
        if (steps[0].cost == 0.0) continue;  // sampled the true class, no update
        const int action = steps[0].action;
        const ModelOutput after_out = fresh.forward(one.batch(std::vector<std::int64_t>{0}));
        const Tensor ga = fresh.gamma_of(after_out);
        const std::vector<double> gamma_after(ga.values().begin(), ga.values().end());
        const PignisticPrediction before_pred(c_before, gamma_before);
        const PignisticPrediction after_pred(c_before, gamma_after);
        CHECK(policy(after_pred).p[static_cast<std::size_t>(action)] <
              policy(before_pred).p[static_cast<std::size_t>(action)]);
    }
}

TEST_CASE("pg epoch: learns the free action on an all-rows-alike matrix") {
    // rows ~ [0,1,5] up to the zero diagonal: predicting class 0 never costs
    EvidenceModel model = zero_evidence_model(3, 41);
    model.attach_head(HeadInit::Zero, 0);
    model.freeze_all_but_head();
    const Dataset data = synth(SyntheticSpec::parse("blobs:K=3,n=67,sigma=0.3,seed=6"));
    std::vector<double> costs = {0, 1, 5,
                                 0, 0, 5,
                                 0, 1, 0};
    const RiskMatrix rm(3, costs);
    Rng rng(12);
    for (int epoch = 0; epoch < 50; ++epoch) pg_epoch(model, data, rm, 0.05, rng);

    // zero backbone: gamma is the same for every sample; its argmax must be 0
    const ModelOutput out = model.forward(data.batch(std::vector<std::int64_t>{0}));
    const Tensor gamma = model.gamma_of(out);
    CHECK(gamma.values()[0] > gamma.values()[1]);
    CHECK(gamma.values()[0] > gamma.values()[2]);
    double gsum = 0.0;
    for (double v : gamma.values()) gsum += v;
    CHECK(gsum == doctest::Approx(3.0).epsilon(1e-9));  // sums to K after training
}

TEST_CASE("pg epoch rejects an unfrozen backbone") {
    EvidenceModel model = zero_evidence_model(3, 51);
    model.attach_head(HeadInit::Zero, 0);
    model.unfreeze_all();
    const Dataset data = synth(SyntheticSpec::parse("blobs:K=3,n=5,sigma=0.1,seed=3"));
    Rng rng(2);
    CHECK_THROWS_AS(pg_epoch(model, data, mnist_risk_matrix(3), 0.05, rng), ConfigError);
}

TEST_CASE("risk matrix: csv loading and rejection") {
    const std::string good = "/tmp/edl_test_rm_good.csv";
    {
        std::ofstream out(good);
        out << "0,1.5\n2.5,0\n";
    }
    const RiskMatrix rm = RiskMatrix::load_csv(good);
    CHECK(rm.k() == 2);
    CHECK(rm.cost(0, 1) == 1.5);
    CHECK(rm.cost(1, 0) == 2.5);

    const std::string neg = "/tmp/edl_test_rm_neg.csv";
    {
        std::ofstream out(neg);
        out << "0,-1\n1,0\n";
    }
    CHECK_THROWS_AS(RiskMatrix::load_csv(neg), DataError);

    const std::string diag = "/tmp/edl_test_rm_diag.csv";
    {
        std::ofstream out(diag);
        out << "1,1\n1,0\n";
    }
    CHECK_THROWS_AS(RiskMatrix::load_csv(diag), DataError);

    const std::string ragged = "/tmp/edl_test_rm_ragged.csv";
    {
        std::ofstream out(ragged);
        out << "0,1\n1\n";
    }
    CHECK_THROWS_AS(RiskMatrix::load_csv(ragged), DataError);
}
