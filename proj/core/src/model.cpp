#include "edl/model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "edl/errors.hpp"

namespace edl {

BackboneSpec BackboneSpec::parse(const std::string& s) {
    BackboneSpec spec;
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
    if (kind == "mlp") {
        spec.kind = BackboneKind::Mlp;
        if (!rest.empty()) {
            spec.hidden.clear();
            std::stringstream ss(rest);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                try {
                    const int w = std::stoi(tok);
                    if (w < 1) throw std::invalid_argument(tok);
                    spec.hidden.push_back(w);
                } catch (const std::exception&) {
                    throw ConfigError("backbone: bad mlp width '" + tok + "' in '" + s + "'");
                }
            }
            if (spec.hidden.empty()) throw ConfigError("backbone: no widths in '" + s + "'");
        }
    } else if (kind == "cnn") {
        spec.kind = BackboneKind::Cnn;
        if (!rest.empty()) {
            if (rest.rfind("w=", 0) != 0) {
                throw ConfigError("backbone: expected cnn:w=<factor>, got '" + s + "'");
            }
            try {
                spec.width_factor = std::stod(rest.substr(2));
            } catch (const std::exception&) {
                throw ConfigError("backbone: bad width factor in '" + s + "'");
            }
            if (!(spec.width_factor > 0.0)) {
                throw ConfigError("backbone: width factor must be positive in '" + s + "'");
            }
        }
    } else {
        throw ConfigError("backbone: unknown kind '" + kind + "' (mlp|cnn)");
    }
    return spec;
}

std::string BackboneSpec::str() const {
    if (kind == BackboneKind::Mlp) {
        std::string s = "mlp:";
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(hidden[i]);
        }
        return s;
    }
    std::ostringstream os;
    os << "cnn:w=" << width_factor;
    return os.str();
}

TrainMode mode_from_string(const std::string& s) {
    if (s == "softmax") return TrainMode::Softmax;
    if (s == "edl") return TrainMode::Edl;
    if (s == "risk-edl") return TrainMode::RiskEdl;
    if (s == "edl-p") return TrainMode::EdlP;
    if (s == "edl-pg") return TrainMode::EdlPg;
    throw ConfigError("unknown mode '" + s + "' (softmax|edl|risk-edl|edl-p|edl-pg)");
}

std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::Softmax: return "softmax";
        case TrainMode::Edl: return "edl";
        case TrainMode::RiskEdl: return "risk-edl";
        case TrainMode::EdlP: return "edl-p";
        case TrainMode::EdlPg: return "edl-pg";
    }
    return "?";
}

namespace {

int scaled(int base, double factor) {
    return std::max(1, static_cast<int>(std::lround(base * factor)));
}

Tensor he_init(Rng& rng, Shape shape, std::int64_t fan_in) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> v(static_cast<std::size_t>(shape_size(shape)));
    for (auto& x : v) x = rng.normal(0.0, stddev);
    return Tensor::param(std::move(shape), std::move(v));
}

}  // namespace

EvidenceModel::EvidenceModel(BackboneSpec spec, Shape sample_shape, int k, Activation act,
                             std::uint64_t seed)
    : activation(act), init_seed(seed), spec_(std::move(spec)),
      sample_shape_(std::move(sample_shape)), k_(k) {
    if (k_ < 2) throw ConfigError("EvidenceModel: need K >= 2 classes");
    labels.resize(static_cast<std::size_t>(k_));
    for (int i = 0; i < k_; ++i) labels[static_cast<std::size_t>(i)] = i;

    Rng rng(seed);
    if (spec_.kind == BackboneKind::Mlp) {
        std::int64_t in = flat_dim();
        for (std::size_t l = 0; l < spec_.hidden.size(); ++l) {
            const std::int64_t out = spec_.hidden[l];
            params_.push_back({"mlp." + std::to_string(l) + ".W", he_init(rng, {in, out}, in)});
            params_.push_back({"mlp." + std::to_string(l) + ".b",
                               Tensor::param({out}, std::vector<double>(static_cast<std::size_t>(out), 0.0))});
            in = out;
        }
        feature_dim_ = static_cast<int>(in);
    } else {
        if (sample_shape_.size() != 3 || sample_shape_[2] != 1) {
            throw ShapeError("cnn backbone expects [H,W,1] samples, got " +
                             shape_str(sample_shape_));
        }
        const std::int64_t h = sample_shape_[0], w = sample_shape_[1];
        const int c1 = scaled(20, spec_.width_factor);
        const int c2 = scaled(50, spec_.width_factor);
        const int dense = scaled(500, spec_.width_factor);
        const std::int64_t h1 = h - 4, w1 = w - 4;  // conv 5x5 valid
        if (h1 < 2 || w1 < 2 || h1 % 2 || w1 % 2) {
            throw ShapeError("cnn backbone: samples " + shape_str(sample_shape_) +
                             " too small or odd after first conv");
        }
        const std::int64_t h2 = h1 / 2 - 4, w2 = w1 / 2 - 4;
        if (h2 < 2 || w2 < 2 || h2 % 2 || w2 % 2) {
            throw ShapeError("cnn backbone: samples " + shape_str(sample_shape_) +
                             " too small or odd after second conv");
        }
        const std::int64_t flat = c2 * (h2 / 2) * (w2 / 2);
        params_.push_back({"conv1.K", he_init(rng, {c1, 1, 5, 5}, 25)});
        params_.push_back({"conv1.b", Tensor::param({c1, 1, 1},
                           std::vector<double>(static_cast<std::size_t>(c1), 0.0))});
        params_.push_back({"conv2.K", he_init(rng, {c2, c1, 5, 5}, 25LL * c1)});
        params_.push_back({"conv2.b", Tensor::param({c2, 1, 1},
                           std::vector<double>(static_cast<std::size_t>(c2), 0.0))});
        params_.push_back({"dense.W", he_init(rng, {flat, dense}, flat)});
        params_.push_back({"dense.b", Tensor::param({dense},
                           std::vector<double>(static_cast<std::size_t>(dense), 0.0))});
        feature_dim_ = dense;
    }
    params_.push_back({"logits.W", he_init(rng, {feature_dim_, k_}, feature_dim_)});
    params_.push_back({"logits.b", Tensor::param({k_},
                       std::vector<double>(static_cast<std::size_t>(k_), 0.0))});
}

EvidenceModel::EvidenceModel(const EvidenceModel& other)
    : activation(other.activation), clamp(other.clamp), mode(other.mode), labels(other.labels),
      epochs_trained(other.epochs_trained), init_seed(other.init_seed), spec_(other.spec_),
      sample_shape_(other.sample_shape_), k_(other.k_), feature_dim_(other.feature_dim_),
      has_head_(other.has_head_) {
    params_.reserve(other.params_.size());
    for (const auto& p : other.params_) {
        Tensor clone = Tensor::from(p.tensor.shape(),
                                    {p.tensor.values().begin(), p.tensor.values().end()});
        clone.set_tracked(p.tensor.tracked());
        params_.push_back({p.name, std::move(clone), p.head});
    }
}

EvidenceModel& EvidenceModel::operator=(const EvidenceModel& other) {
    if (this != &other) {
        EvidenceModel copy(other);
        *this = std::move(copy);
    }
    return *this;
}

std::int64_t EvidenceModel::flat_dim() const { return shape_size(sample_shape_); }

const Tensor& EvidenceModel::param(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p.tensor;
    }
    throw ConfigError("EvidenceModel: no parameter named '" + name + "'");
}

ModelOutput EvidenceModel::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != flat_dim()) {
        throw ShapeError("forward: expected [N," + std::to_string(flat_dim()) + "] batch, got " +
                         shape_str(x.shape()));
    }
    Tensor features;
    if (spec_.kind == BackboneKind::Mlp) {
        Tensor h = x;
        for (std::size_t l = 0; l < spec_.hidden.size(); ++l) {
            const std::string idx = std::to_string(l);
            h = relu(matmul(h, param("mlp." + idx + ".W")) + param("mlp." + idx + ".b"));
        }
        features = h;
    } else {
        const std::int64_t n = x.dim(0);
        const std::int64_t h = sample_shape_[0], w = sample_shape_[1];
        Tensor z = reshape(x, {n, 1, h, w});
        z = maxpool2x2(relu(conv2d(z, param("conv1.K"), Padding::Valid) + param("conv1.b")));
        z = maxpool2x2(relu(conv2d(z, param("conv2.K"), Padding::Valid) + param("conv2.b")));
        z = reshape(z, {n, z.size() / n});
        features = relu(matmul(z, param("dense.W")) + param("dense.b"));
    }
    Tensor logits = matmul(features, param("logits.W")) + param("logits.b");
    return {features, logits};
}

Tensor EvidenceModel::evidence_of(const ModelOutput& out) const {
    return evidence(out.logits, EvidenceActivation{activation, clamp});
}

Tensor EvidenceModel::gamma_of(const ModelOutput& out) const {
    if (!has_head_) throw ConfigError("gamma_of: model has no pignistic head");
    const Tensor z = matmul(out.features, param("head.W")) + param("head.b");
    return static_cast<double>(k_) * softmax(z);
}

Tensor EvidenceModel::alpha_of(const ModelOutput& out) const {
    const Tensor c = evidence_of(out);
    if (has_head_) return c + gamma_of(out);
    return c + 1.0;
}

Tensor EvidenceModel::predictive(const Tensor& x) const {
    const ModelOutput out = forward(x);
    if (mode == TrainMode::Softmax) return softmax(out.logits);
    const Tensor alpha = alpha_of(out);
    return alpha / sum_last(alpha);
}

void EvidenceModel::attach_head(HeadInit init, std::uint64_t seed) {
    if (has_head_) throw ConfigError("attach_head: model already has a pignistic head");
    std::vector<double> w(static_cast<std::size_t>(feature_dim_) * static_cast<std::size_t>(k_), 0.0);
    if (init == HeadInit::Gaussian) {
        Rng rng(seed);
        for (auto& v : w) v = rng.normal(0.0, 0.01);
    }
    params_.push_back({"head.W", Tensor::param({feature_dim_, k_}, std::move(w)), true});
    params_.push_back({"head.b", Tensor::param({k_},
                       std::vector<double>(static_cast<std::size_t>(k_), 0.0)), true});
    has_head_ = true;
}

void EvidenceModel::freeze_all_but_head() {
    for (auto& p : params_) p.tensor.set_tracked(p.head);
}

void EvidenceModel::unfreeze_all() {
    for (auto& p : params_) p.tensor.set_tracked(true);
}

bool EvidenceModel::backbone_frozen() const {
    for (const auto& p : params_) {
        if (!p.head && p.tensor.tracked()) return false;
    }
    return true;
}

std::vector<Tensor> EvidenceModel::trainable_tensors() {
    std::vector<Tensor> out;
    for (auto& p : params_) {
        if (p.tensor.tracked()) out.push_back(p.tensor);
    }
    return out;
}

void EvidenceModel::zero_grads() {
    for (auto& p : params_) p.tensor.zero_grad();
}

std::string EvidenceModel::checksum(bool include_head) const {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    for (const auto& p : params_) {
        if (p.head && !include_head) continue;
        EVP_DigestUpdate(ctx, p.name.data(), p.name.size());
        const auto vals = p.tensor.values();
        EVP_DigestUpdate(ctx, vals.data(), vals.size() * sizeof(double));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

}  // namespace edl
