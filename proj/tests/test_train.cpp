#include <doctest.h>

#include <cmath>
#include <sstream>

#include "edl/data.hpp"
#include "edl/errors.hpp"
#include "edl/metrics.hpp"
#include "edl/train.hpp"

using namespace edl;

namespace {

const char* kBlobs = "blobs:K=2,n=60,sigma=0.4,seed=71";

double mean_entropy(const EvidenceModel& model, const Dataset& data) {
    const Predictions preds = predict(model, data);
    double acc = 0.0;
    for (double h : preds.entropy) acc += h;
    return acc / static_cast<double>(preds.entropy.size());
}

// overlapping 3-class task where mispredicting class 2 for class-0 samples
// is catastrophic
Dataset ambiguous_blobs(std::uint64_t seed) {
    SyntheticSpec spec = SyntheticSpec::parse("blobs:K=3,n=120,sigma=2.4");
    spec.seed = seed;
    return synth(spec);
}

RiskMatrix lopsided_matrix() {
    // heavy cost for predicting class 2 when the truth is class 0
    std::vector<double> costs = {0, 1, 40,
                                 1, 0, 1,
                                 1, 1, 0};
    return RiskMatrix(3, std::move(costs));
}

}  // namespace

TEST_CASE("pretrain_softmax: separable blobs reach train accuracy 1.0") {
    const Dataset data = synth(SyntheticSpec::parse(kBlobs));
    EvidenceModel model = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 7);
    TrainOptions opts;
    opts.epochs = 50;
    opts.lr = 1e-2;
    opts.seed = 7;
    const TrainLog log = pretrain_softmax(model, data, opts);
    CHECK(log.size() == 50);
    const Predictions preds = predict(model, data);
    CHECK(accuracy(preds.pred_local, data.labels) == 1.0);
    CHECK(model.mode == TrainMode::Softmax);
}

TEST_CASE("epochs=0 leaves the seeded init untouched") {
    const Dataset data = synth(SyntheticSpec::parse(kBlobs));
    EvidenceModel model = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 9);
    const std::string before = model.checksum(true);
    TrainOptions opts;
    opts.epochs = 0;
    pretrain_softmax(model, data, opts);
    CHECK(model.checksum(true) == before);
}

TEST_CASE("fixed seed twice gives identical parameters") {
    const Dataset data = synth(SyntheticSpec::parse(kBlobs));
    TrainOptions opts;
    opts.epochs = 5;
    opts.lr = 1e-2;
    opts.seed = 77;
    EvidenceModel a = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 42);
    pretrain_softmax(a, data, opts);
    EvidenceModel b = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 42);
    pretrain_softmax(b, data, opts);
    CHECK(a.checksum(true) == b.checksum(true));

    EvidenceModel c = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 42);
    opts.seed = 78;
    pretrain_softmax(c, data, opts);
    CHECK(a.checksum(true) != c.checksum(true));
}

TEST_CASE("train_edl: accurate and confident on train, uncertain off-distribution") {
    const Dataset data = synth(SyntheticSpec::parse("blobs:K=3,n=80,sigma=0.25,seed=71"));
    EvidenceModel model = make_model(BackboneSpec::parse("mlp:16"), data, Activation::Softplus, 11);
    TrainOptions opts;
    opts.epochs = 100;
    opts.lr = 1e-2;
    opts.seed = 11;
    opts.act = Activation::Softplus;
    const TrainLog log = train_edl(model, data, opts);
    CHECK(model.mode == TrainMode::Edl);
    CHECK(log.back().lambda == 1.0);

    const Predictions preds = predict(model, data);
    CHECK(accuracy(preds.pred_local, data.labels) == 1.0);
    const double ln_k = std::log(3.0);
    CHECK(mean_entropy(model, data) < 0.3 * ln_k);

    const Dataset far = synth(SyntheticSpec::parse("blobs-ood:K=3,n=60,sigma=0.25,seed=72"));
    CHECK(mean_entropy(model, far) > 0.8 * ln_k);
}

TEST_CASE("finetune_edl: gate on mode, epochs=0 is the identity reinterpretation") {
    const Dataset data = synth(SyntheticSpec::parse(kBlobs));
    EvidenceModel model = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 13);
    TrainOptions opts;
    opts.epochs = 0;
    {
        // an evidential model cannot be "fine-tuned from softmax"
        EvidenceModel edl_model = model;
        TrainOptions eopts;
        eopts.epochs = 1;
        eopts.seed = 13;
        train_edl(edl_model, data, eopts);
        CHECK_THROWS_AS(finetune_edl(edl_model, data, opts), ConfigError);
    }

    TrainOptions pre;
    pre.epochs = 30;
    pre.lr = 1e-2;
    pre.seed = 13;
    pretrain_softmax(model, data, pre);
    const std::string frozen = model.checksum(true);

    TrainOptions tune;
    tune.epochs = 0;
    tune.act = Activation::ClampedExp;
    finetune_edl(model, data, tune);
    CHECK(model.checksum(true) == frozen);  // same parameters
    CHECK(model.mode == TrainMode::Edl);
    CHECK(model.activation == Activation::ClampedExp);
    // forward is now the pretrained logits reinterpreted through the activation
    const ModelOutput out = model.forward(data.batch(std::vector<std::int64_t>{0, 1}));
    const Tensor c = model.evidence_of(out);
    const Tensor ref = evidence(out.logits, {Activation::ClampedExp, model.clamp});
    for (std::size_t i = 0; i < c.values().size(); ++i) {
        CHECK(c.values()[i] == ref.values()[i]);
    }
}

TEST_CASE("finetune_edl keeps accuracy while widening the entropy gap") {
    SyntheticSpec spec = SyntheticSpec::parse("blobs:K=3,n=150,sigma=1.5");
    spec.seed = 17;
    const Dataset train = synth(spec);
    spec.seed = 18;
    const Dataset test = synth(spec);

    EvidenceModel model = make_model(BackboneSpec::parse("mlp:16"), train, Activation::Softplus, 17);
    TrainOptions pre;
    pre.epochs = 40;
    pre.lr = 1e-2;
    pre.seed = 17;
    pretrain_softmax(model, train, pre);
    const EvalReport base = evaluate(model, test, nullptr, nullptr);

    TrainOptions tune;
    tune.epochs = 10;
    tune.lr = 1e-3;
    tune.act = Activation::ClampedExp;
    tune.seed = 19;
    finetune_edl(model, train, tune);
    const EvalReport tuned = evaluate(model, test, nullptr, nullptr);

    CHECK(tuned.accuracy >= base.accuracy - 0.02);  // accuracy drop below 2 points
    REQUIRE(base.entropy_auc_incorrect.has_value());
    REQUIRE(tuned.entropy_auc_incorrect.has_value());
    CHECK(*tuned.entropy_auc_incorrect < *base.entropy_auc_incorrect);
}

TEST_CASE("train_risk: zero matrix under mode p leaves the head unchanged") {
    const Dataset data = ambiguous_blobs(23);
    EvidenceModel model = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 23);
    TrainOptions opts;
    opts.epochs = 20;
    opts.lr = 1e-2;
    opts.seed = 23;
    train_edl(model, data, opts);

    TrainOptions head;
    head.epochs = 5;
    head.lr = 1e-3;
    head.seed = 24;
    const RiskMatrix zero = RiskMatrix::zero(3);
    TrainLog log = train_risk(model, data, zero, TrainMode::EdlP, head);
    CHECK(model.mode == TrainMode::EdlP);
    // zero-init head must still be exactly uniform: gradients were all zero
    const Tensor gamma = model.gamma_of(model.forward(data.batch(std::vector<std::int64_t>{0})));
    for (double g : gamma.values()) CHECK(g == 1.0);
}

TEST_CASE("train_risk rejects head modes on softmax models and missing prerequisites") {
    const Dataset data = ambiguous_blobs(29);
    EvidenceModel model = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 29);
    TrainOptions pre;
    pre.epochs = 2;
    pre.seed = 29;
    pretrain_softmax(model, data, pre);
    TrainOptions head;
    head.epochs = 1;
    CHECK_THROWS_AS(train_risk(model, data, lopsided_matrix(), TrainMode::EdlP, head), ConfigError);
    CHECK_THROWS_AS(train_risk(model, data, lopsided_matrix(), TrainMode::EdlPg, head), ConfigError);
    CHECK_THROWS_AS(train_risk(model, data, lopsided_matrix(), TrainMode::Softmax, head), ConfigError);
}

TEST_CASE("risk-aware heads cut the test cost; pg lands near p") {
    const Dataset train = ambiguous_blobs(31);
    const Dataset test = ambiguous_blobs(32);
    const RiskMatrix rm = lopsided_matrix();

    EvidenceModel base = make_model(BackboneSpec::parse("mlp:16"), train, Activation::Softplus, 31);
    TrainOptions opts;
    opts.epochs = 30;
    opts.lr = 1e-2;
    opts.seed = 31;
    train_edl(base, train, opts);
    const EvalReport plain = evaluate(base, test, &rm, nullptr);
    REQUIRE(plain.avg_cost.has_value());

    // supervised head on the frozen base
    EvidenceModel p_model = base;
    TrainOptions head;
    head.epochs = 60;
    head.lr = 5e-3;
    head.seed = 33;
    const std::string frozen_before = base.checksum(false);
    train_risk(p_model, train, rm, TrainMode::EdlP, head);
    CHECK(p_model.checksum(false) == frozen_before);  // freeze discipline, externally checked
    const EvalReport with_p = evaluate(p_model, test, &rm, nullptr);
    REQUIRE(with_p.avg_cost.has_value());
    CHECK(*with_p.avg_cost < *plain.avg_cost);

    // bandit head from the same base
    EvidenceModel pg_model = base;
    TrainOptions bandit;
    bandit.epochs = 60;
    bandit.lr = 5e-3;
    bandit.seed = 34;
    train_risk(pg_model, train, rm, TrainMode::EdlPg, bandit);
    CHECK(pg_model.checksum(false) == frozen_before);
    const EvalReport with_pg = evaluate(pg_model, test, &rm, nullptr);
    REQUIRE(with_pg.avg_cost.has_value());
    CHECK(*with_pg.avg_cost < *plain.avg_cost);
    CHECK(*with_pg.avg_cost <= 1.1 * *with_p.avg_cost);
}

TEST_CASE("risk-edl trains jointly from scratch and beats plain edl on cost") {
    const Dataset train = ambiguous_blobs(37);
    const Dataset test = ambiguous_blobs(38);
    const RiskMatrix rm = lopsided_matrix();

    EvidenceModel plain = make_model(BackboneSpec::parse("mlp:16"), train, Activation::Softplus, 37);
    TrainOptions opts;
    opts.epochs = 30;
    opts.lr = 1e-2;
    opts.seed = 37;
    train_edl(plain, train, opts);
    const EvalReport base = evaluate(plain, test, &rm, nullptr);

    EvidenceModel joint = make_model(BackboneSpec::parse("mlp:16"), train, Activation::Softplus, 37);
    TrainOptions jopts = opts;
    jopts.kappa = 0.01;
    train_risk(joint, train, rm, TrainMode::RiskEdl, jopts);
    CHECK(joint.mode == TrainMode::RiskEdl);
    CHECK(joint.has_head());
    const EvalReport risky = evaluate(joint, test, &rm, nullptr);
    REQUIRE(risky.avg_cost.has_value());
    CHECK(*risky.avg_cost < *base.avg_cost);
}

TEST_CASE("train log columns carry lambda and cost when applicable") {
    const Dataset data = ambiguous_blobs(41);
    EvidenceModel model = make_model(BackboneSpec::parse("mlp:8"), data, Activation::Softplus, 41);
    const RiskMatrix rm = lopsided_matrix();
    TrainOptions opts;
    opts.epochs = 3;
    opts.seed = 41;
    opts.log_costs = &rm;
    const TrainLog log = train_edl(model, data, opts);
    REQUIRE(log.size() == 3);
    CHECK(log[0].lambda == doctest::Approx(0.1));
    CHECK(log[2].lambda == doctest::Approx(0.3));
    CHECK(log[0].cost.has_value());

    std::ostringstream csv;
    write_train_log_csv(log, csv);
    CHECK(csv.str().rfind("epoch,loss,lambda,acc,cost\n", 0) == 0);
}
