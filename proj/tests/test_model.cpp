#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "edl/checkpoint.hpp"
#include "edl/data.hpp"
#include "edl/errors.hpp"
#include "edl/model.hpp"

using namespace edl;

namespace {

std::vector<double> forward_flat(const EvidenceModel& model, const Tensor& x) {
    const Tensor probs = model.predictive(x);
    return {probs.values().begin(), probs.values().end()};
}

Tensor small_batch(std::uint64_t seed, std::int64_t n, std::int64_t d) {
    Rng rng(seed);
    std::vector<double> v(static_cast<std::size_t>(n * d));
    for (auto& x : v) x = rng.uniform(0.0, 1.0);
    return Tensor::from({n, d}, std::move(v));
}

}  // namespace

TEST_CASE("backbone spec parsing") {
    const BackboneSpec mlp = BackboneSpec::parse("mlp:256,128");
    CHECK(mlp.kind == BackboneKind::Mlp);
    CHECK(mlp.hidden == std::vector<int>{256, 128});
    CHECK(mlp.str() == "mlp:256,128");

    const BackboneSpec cnn = BackboneSpec::parse("cnn:w=0.25");
    CHECK(cnn.kind == BackboneKind::Cnn);
    CHECK(cnn.width_factor == doctest::Approx(0.25));

    CHECK_THROWS_AS(BackboneSpec::parse("rnn:32"), ConfigError);
    CHECK_THROWS_AS(BackboneSpec::parse("mlp:0"), ConfigError);
    CHECK_THROWS_AS(BackboneSpec::parse("cnn:w=-1"), ConfigError);
}

TEST_CASE("mlp forward exposes penultimate features and logits") {
    EvidenceModel model(BackboneSpec::parse("mlp:16,8"), {12}, 4, Activation::Softplus, 3);
    const Tensor x = small_batch(1, 5, 12);
    const ModelOutput out = model.forward(x);
    CHECK(out.features.shape() == Shape{5, 8});
    CHECK(out.logits.shape() == Shape{5, 4});
    CHECK(model.feature_dim() == 8);
    CHECK_THROWS_AS(model.forward(small_batch(1, 5, 11)), ShapeError);
}

TEST_CASE("cnn forward on 28x28 with the width factor") {
    EvidenceModel model(BackboneSpec::parse("cnn:w=0.1"), {28, 28, 1}, 10, Activation::Softplus, 3);
    // 0.1 scales (20, 50, 500) to (2, 5, 50)
    CHECK(model.feature_dim() == 50);
    const Tensor x = small_batch(2, 3, 28 * 28);
    const ModelOutput out = model.forward(x);
    CHECK(out.features.shape() == Shape{3, 50});
    CHECK(out.logits.shape() == Shape{3, 10});
}

TEST_CASE("evidence is non-negative for every activation") {
    for (Activation act : {Activation::Relu, Activation::Softplus, Activation::Exp,
                           Activation::ClampedExp}) {
        EvidenceModel model(BackboneSpec::parse("mlp:8"), {6}, 3, act, 11);
        const ModelOutput out = model.forward(small_batch(7, 10, 6));
        for (double c : model.evidence_of(out).values()) CHECK(c >= 0.0);
    }
}

TEST_CASE("predictive distribution sums to one in both modes") {
    EvidenceModel model(BackboneSpec::parse("mlp:8"), {6}, 3, Activation::Softplus, 13);
    const Tensor x = small_batch(5, 4, 6);
    for (TrainMode mode : {TrainMode::Softmax, TrainMode::Edl}) {
        model.mode = mode;
        const Tensor probs = model.predictive(x);
        for (std::int64_t r = 0; r < 4; ++r) {
            double s = 0.0;
            for (std::int64_t j = 0; j < 3; ++j) {
                s += probs.values()[static_cast<std::size_t>(r * 3 + j)];
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("gamma requires a head, sums to K, positive") {
    EvidenceModel model(BackboneSpec::parse("mlp:8"), {6}, 5, Activation::Softplus, 17);
    const Tensor x = small_batch(2, 3, 6);
    CHECK_THROWS_AS(model.gamma_of(model.forward(x)), ConfigError);
    model.attach_head(HeadInit::Gaussian, 18);
    CHECK_THROWS_AS(model.attach_head(HeadInit::Zero, 0), ConfigError);
    const Tensor gamma = model.gamma_of(model.forward(x));
    for (std::int64_t r = 0; r < 3; ++r) {
        double s = 0.0;
        for (std::int64_t j = 0; j < 5; ++j) {
            const double g = gamma.values()[static_cast<std::size_t>(r * 5 + j)];
            CHECK(g > 0.0);
            s += g;
        }
        CHECK(s == doctest::Approx(5.0).epsilon(1e-9));
    }
}

TEST_CASE("zero head init gives the exactly uniform prior") {
    EvidenceModel model(BackboneSpec::parse("mlp:8"), {6}, 4, Activation::Softplus, 19);
    model.attach_head(HeadInit::Zero, 0);
    const Tensor gamma = model.gamma_of(model.forward(small_batch(3, 2, 6)));
    for (double g : gamma.values()) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("freeze discipline: checksums and trainability") {
    EvidenceModel model(BackboneSpec::parse("mlp:8"), {6}, 3, Activation::Softplus, 23);
    model.attach_head(HeadInit::Gaussian, 24);
    const std::string backbone_sum = model.checksum(false);
    model.freeze_all_but_head();
    CHECK(model.backbone_frozen());
    CHECK(model.trainable_tensors().size() == 2);  // head W and b
    // mutate the head; the backbone hash must not move
    for (auto& p : model.params()) {
        if (p.head) {
            for (auto& v : p.tensor.mutable_values()) v += 0.25;
        }
    }
    CHECK(model.checksum(false) == backbone_sum);
    CHECK(model.checksum(true) != backbone_sum);
    model.unfreeze_all();
    CHECK(!model.backbone_frozen());
}

TEST_CASE("checkpoint round trip is forward-bitwise identical") {
    EvidenceModel model(BackboneSpec::parse("mlp:16,8"), {12}, 4, Activation::ClampedExp, 29);
    model.attach_head(HeadInit::Gaussian, 30);
    model.mode = TrainMode::EdlP;
    model.labels = {3, 5, 7, 9};
    model.epochs_trained = 17;
    const Tensor x = small_batch(31, 6, 12);
    const std::vector<double> before = forward_flat(model, x);

    const std::string path = "/tmp/edl_test_ckpt.bin";
    save_checkpoint(model, path);
    const EvidenceModel loaded = load_checkpoint(path);
    CHECK(loaded.mode == TrainMode::EdlP);
    CHECK(loaded.labels == std::vector<int>{3, 5, 7, 9});
    CHECK(loaded.epochs_trained == 17);
    CHECK(loaded.activation == Activation::ClampedExp);
    CHECK(loaded.has_head());
    const std::vector<double> after = forward_flat(loaded, x);
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);
    CHECK(loaded.checksum(true) == model.checksum(true));
    std::remove(path.c_str());
}

TEST_CASE("checkpoint: corrupted magic is rejected") {
    EvidenceModel model(BackboneSpec::parse("mlp:4"), {3}, 2, Activation::Relu, 37);
    const std::string path = "/tmp/edl_test_ckpt_magic.bin";
    save_checkpoint(model, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(2);
        f.put('x');
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint: truncation and wrong K give distinct diagnostics") {
    EvidenceModel model(BackboneSpec::parse("mlp:4"), {3}, 3, Activation::Relu, 41);
    const std::string path = "/tmp/edl_test_ckpt_trunc.bin";
    save_checkpoint(model, path);

    // truncate
    std::vector<char> bytes;
    {
        std::ifstream f(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    const std::string trunc_path = "/tmp/edl_test_ckpt_trunc2.bin";
    {
        std::ofstream f(trunc_path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(trunc_path), doctest::Contains("truncated"), DataError);

    // bump the stored K; the label count check trips first, and a patched
    // label section still leaves parameter shapes inconsistent
    std::vector<char> wrong = bytes;
    // layout: magic(8) version(4) kind(1) nhidden(4) hidden(4) width(8)
    //         act(1) clamp(8) mode(1) K(4) ...
    const std::size_t k_off = 8 + 4 + 1 + 4 + 4 + 8 + 1 + 8 + 1;
    wrong[k_off] = 4;
    const std::string wrong_path = "/tmp/edl_test_ckpt_wrongk.bin";
    {
        std::ofstream f(wrong_path, std::ios::binary);
        f.write(wrong.data(), static_cast<std::streamsize>(wrong.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(wrong_path), DataError);
    try {
        load_checkpoint(wrong_path);
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("does not match K") != std::string::npos);
    }
    std::remove(path.c_str());
    std::remove(trunc_path.c_str());
    std::remove(wrong_path.c_str());
}

TEST_CASE("checkpoint: version mismatch is rejected") {
    EvidenceModel model(BackboneSpec::parse("mlp:4"), {3}, 2, Activation::Relu, 43);
    const std::string path = "/tmp/edl_test_ckpt_ver.bin";
    save_checkpoint(model, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        f.put(9);  // version LE low byte
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("identical seeds build identical models") {
    EvidenceModel a(BackboneSpec::parse("mlp:16"), {10}, 4, Activation::Softplus, 99);
    EvidenceModel b(BackboneSpec::parse("mlp:16"), {10}, 4, Activation::Softplus, 99);
    CHECK(a.checksum(true) == b.checksum(true));
    EvidenceModel c(BackboneSpec::parse("mlp:16"), {10}, 4, Activation::Softplus, 100);
    CHECK(a.checksum(true) != c.checksum(true));
}
