#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edl/autodiff.hpp"
#include "edl/edl_loss.hpp"
#include "edl/rng.hpp"
#include "edl/tensor.hpp"

namespace edl {

enum class BackboneKind { Mlp, Cnn };

// mlp:<w1,w2,...> relu stack, or cnn:w=<f> scaling the conv/conv/dense
// widths (20, 50, 500). The logits layer always has K outputs.
struct BackboneSpec {
    BackboneKind kind = BackboneKind::Mlp;
    std::vector<int> hidden{128};
    double width_factor = 1.0;

    static BackboneSpec parse(const std::string& s);
    std::string str() const;
};

enum class TrainMode { Softmax, Edl, RiskEdl, EdlP, EdlPg };

TrainMode mode_from_string(const std::string& s);
std::string to_string(TrainMode m);

struct NamedParam {
    std::string name;
    Tensor tensor;
    bool head = false;  // pignistic-head parameter group
};

struct ModelOutput {
    Tensor features;  // g(x), penultimate activations [N,F]
    Tensor logits;    // f(x) [N,K]
};

enum class HeadInit { Zero, Gaussian };

// Backbone + evidence head + optional pignistic-prior head. Forward exposes
// both the penultimate features and the logits; all heavier semantics
// (evidence, prior, predictive distribution) are composed from those.
class EvidenceModel {
public:
    EvidenceModel(BackboneSpec spec, Shape sample_shape, int k, Activation act,
                  std::uint64_t seed);

    // Copies are deep: parameter tensors are cloned, not aliased.
    EvidenceModel(const EvidenceModel& other);
    EvidenceModel& operator=(const EvidenceModel& other);
    EvidenceModel(EvidenceModel&&) = default;
    EvidenceModel& operator=(EvidenceModel&&) = default;

    // x is [N, flattened sample]; CNN backbones reshape internally.
    ModelOutput forward(const Tensor& x) const;

    Tensor evidence_of(const ModelOutput& out) const;  // zeta(logits), >= 0
    // gamma = K softmax(W g + b); requires the pignistic head.
    Tensor gamma_of(const ModelOutput& out) const;
    // Dirichlet concentrations: evidence + gamma with a head, evidence + 1 without.
    Tensor alpha_of(const ModelOutput& out) const;
    // Predictive class probabilities [N,K]: softmax(logits) in softmax mode,
    // the Dirichlet mean otherwise.
    Tensor predictive(const Tensor& x) const;

    bool has_head() const { return has_head_; }
    void attach_head(HeadInit init, std::uint64_t seed);

    void freeze_all_but_head();
    void unfreeze_all();
    bool backbone_frozen() const;

    std::vector<NamedParam>& params() { return params_; }
    const std::vector<NamedParam>& params() const { return params_; }
    std::vector<Tensor> trainable_tensors();
    void zero_grads();

    // SHA-256 hex digest of the raw parameter payloads (head excluded or not);
    // used to verify freeze discipline across training phases.
    std::string checksum(bool include_head) const;

    const BackboneSpec& spec() const { return spec_; }
    const Shape& sample_shape() const { return sample_shape_; }
    std::int64_t flat_dim() const;
    int k() const { return k_; }
    int feature_dim() const { return feature_dim_; }

    Activation activation = Activation::Softplus;
    double clamp = 10.0;
    TrainMode mode = TrainMode::Softmax;
    std::vector<int> labels;  // global class ids, size K
    std::uint32_t epochs_trained = 0;
    std::uint64_t init_seed = 0;

private:
    BackboneSpec spec_;
    Shape sample_shape_;
    int k_;
    int feature_dim_ = 0;
    bool has_head_ = false;
    std::vector<NamedParam> params_;

    const Tensor& param(const std::string& name) const;
};

}  // namespace edl
