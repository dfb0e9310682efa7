#include "edl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "edl/errors.hpp"

namespace edl {

namespace {

constexpr char kMagic[8] = {'E', 'D', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    }
    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 8);
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    bool good() const { return out_.good(); }

private:
    std::ofstream out_;
};

class Reader {
public:
    Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw DataError("checkpoint: cannot open '" + path + "'");
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw DataError("checkpoint '" + path_ + "': truncated file");
        }
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint8_t b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint8_t b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t max_len = 1 << 20) {
        const std::uint32_t n = u32();
        if (n > max_len) throw DataError("checkpoint '" + path_ + "': corrupt string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    const std::string& path() const { return path_; }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const EvidenceModel& model, const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, 8);
    w.u32(kVersion);
    w.u8(model.spec().kind == BackboneKind::Mlp ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(model.spec().hidden.size()));
    for (int h : model.spec().hidden) w.u32(static_cast<std::uint32_t>(h));
    w.f64(model.spec().width_factor);
    w.u8(static_cast<std::uint8_t>(model.activation));
    w.f64(model.clamp);
    w.u8(static_cast<std::uint8_t>(model.mode));
    w.u32(static_cast<std::uint32_t>(model.k()));
    w.u32(static_cast<std::uint32_t>(model.labels.size()));
    for (int lab : model.labels) w.u32(static_cast<std::uint32_t>(lab));
    w.u32(static_cast<std::uint32_t>(model.sample_shape().size()));
    for (auto d : model.sample_shape()) w.i64(d);
    w.u32(model.epochs_trained);
    w.u64(model.init_seed);
    w.u8(model.has_head() ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(model.params().size()));
    for (const auto& p : model.params()) {
        w.str(p.name);
        w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
        for (auto d : p.tensor.shape()) w.i64(d);
        for (double v : p.tensor.values()) w.f64(v);
    }
    if (!w.good()) throw DataError("checkpoint: write to '" + path + "' failed");
}

EvidenceModel load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("checkpoint '" + path + "': bad magic bytes");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw DataError("checkpoint '" + path + "': format version " + std::to_string(version) +
                        " not supported (expected " + std::to_string(kVersion) + ")");
    }
    BackboneSpec spec;
    spec.kind = r.u8() == 0 ? BackboneKind::Mlp : BackboneKind::Cnn;
    spec.hidden.clear();
    const std::uint32_t nh = r.u32();
    if (nh > 1024) throw DataError("checkpoint '" + path + "': corrupt layer count");
    for (std::uint32_t i = 0; i < nh; ++i) spec.hidden.push_back(static_cast<int>(r.u32()));
    spec.width_factor = r.f64();
    const auto act = static_cast<Activation>(r.u8());
    const double clamp = r.f64();
    const auto mode = static_cast<TrainMode>(r.u8());
    const int k = static_cast<int>(r.u32());
    const std::uint32_t nlabels = r.u32();
    if (nlabels != static_cast<std::uint32_t>(k)) {
        throw DataError("checkpoint '" + path + "': label count " + std::to_string(nlabels) +
                        " does not match K=" + std::to_string(k));
    }
    std::vector<int> labels(nlabels);
    for (auto& lab : labels) lab = static_cast<int>(r.u32());
    const std::uint32_t srank = r.u32();
    if (srank > 8) throw DataError("checkpoint '" + path + "': corrupt sample shape");
    Shape sample_shape(srank);
    for (auto& d : sample_shape) d = r.i64();
    const std::uint32_t epochs = r.u32();
    const std::uint64_t seed = r.u64();
    const bool has_head = r.u8() != 0;

    EvidenceModel model(spec, sample_shape, k, act, seed);
    model.clamp = clamp;
    model.mode = mode;
    model.labels = labels;
    model.epochs_trained = epochs;
    if (has_head) model.attach_head(HeadInit::Zero, seed);

    const std::uint32_t nparams = r.u32();
    if (nparams != model.params().size()) {
        throw DataError("checkpoint '" + path + "': shape mismatch: " + std::to_string(nparams) +
                        " parameter records, model built from metadata has " +
                        std::to_string(model.params().size()));
    }
    for (std::uint32_t i = 0; i < nparams; ++i) {
        const std::string name = r.str();
        auto& p = model.params()[i];
        if (p.name != name) {
            throw DataError("checkpoint '" + path + "': unexpected parameter '" + name +
                            "' (expected '" + p.name + "')");
        }
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw DataError("checkpoint '" + path + "': corrupt tensor rank");
        Shape shape(rank);
        for (auto& d : shape) d = r.i64();
        if (shape != p.tensor.shape()) {
            throw DataError("checkpoint '" + path + "': shape mismatch for '" + name + "': file has " +
                            shape_str(shape) + ", model expects " + shape_str(p.tensor.shape()));
        }
        auto vals = p.tensor.mutable_values();
        for (auto& v : vals) v = r.f64();
    }
    return model;
}

}  // namespace edl
