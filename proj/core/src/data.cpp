#include "edl/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "edl/errors.hpp"
#include "edl/rng.hpp"

namespace edl {

std::span<const double> Dataset::sample(std::int64_t i) const {
    const std::int64_t d = flat_dim();
    return std::span<const double>(values.data() + i * d, static_cast<std::size_t>(d));
}

Tensor Dataset::batch(std::span<const std::int64_t> idx) const {
    const std::int64_t d = flat_dim();
    std::vector<double> v(idx.size() * static_cast<std::size_t>(d));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto s = sample(idx[r]);
        std::copy(s.begin(), s.end(), v.begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(d)));
    }
    return Tensor::from({static_cast<std::int64_t>(idx.size()), d}, std::move(v));
}

void Dataset::validate() const {
    if (k < 1) throw DataError("dataset '" + name + "': K must be positive");
    if (values.size() != static_cast<std::size_t>(n() * flat_dim())) {
        throw DataError("dataset '" + name + "': value count " + std::to_string(values.size()) +
                        " does not match " + std::to_string(n()) + " samples of " +
                        std::to_string(flat_dim()) + " features");
    }
    if (label_ids.size() != static_cast<std::size_t>(k)) {
        throw DataError("dataset '" + name + "': label_ids size " +
                        std::to_string(label_ids.size()) + " does not match K=" + std::to_string(k));
    }
    for (int lab : labels) {
        if (lab < 0 || lab >= k) {
            throw DataError("dataset '" + name + "': label " + std::to_string(lab) +
                            " outside [0," + std::to_string(k) + ")");
        }
    }
    if (is_image()) {
        for (double v : values) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw DataError("dataset '" + name + "': pixel value " + std::to_string(v) +
                                " outside [0,1]");
            }
        }
    }
}

SyntheticSpec SyntheticSpec::parse(const std::string& s) {
    SyntheticSpec spec;
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    if (kind == "blobs") {
        spec.kind = Kind::Blobs;
    } else if (kind == "blobs-ood") {
        spec.kind = Kind::BlobsOod;
    } else if (kind == "moons") {
        spec.kind = Kind::Moons;
        spec.k = 2;
    } else if (kind == "digits") {
        spec.kind = Kind::Digits;
        spec.k = 10;
        spec.sigma = 1.0;
    } else if (kind == "noise") {
        spec.kind = Kind::Noise;
        spec.k = 10;
    } else {
        throw ConfigError("synth: unknown generator '" + kind +
                          "' (blobs|blobs-ood|moons|digits|noise)");
    }
    if (colon == std::string::npos) return spec;
    std::stringstream ss(s.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigError("synth: expected key=value, got '" + tok + "'");
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        try {
            if (key == "K") {
                spec.k = std::stoi(val);
            } else if (key == "n") {
                spec.per_class = std::stoi(val);
            } else if (key == "sigma") {
                spec.sigma = std::stod(val);
            } else if (key == "seed") {
                spec.seed = std::stoull(val);
            } else {
                throw ConfigError("synth: unknown key '" + key + "' in '" + s + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("synth: cannot parse '" + tok + "' in '" + s + "'");
        }
    }
    if (spec.k < 1) throw ConfigError("synth: K must be positive");
    if (spec.per_class < 1) throw ConfigError("synth: per-class count must be positive");
    if (spec.sigma < 0.0) throw ConfigError("synth: sigma must be non-negative");
    if (spec.kind == Kind::Moons && spec.k != 2) throw ConfigError("synth: moons is a 2-class task");
    if (spec.kind == Kind::Digits && (spec.k < 1 || spec.k > 10)) {
        throw ConfigError("synth: digits supports K in [1,10]");
    }
    return spec;
}

std::string SyntheticSpec::str() const {
    std::string kind;
    switch (this->kind) {
        case Kind::Blobs: kind = "blobs"; break;
        case Kind::BlobsOod: kind = "blobs-ood"; break;
        case Kind::Moons: kind = "moons"; break;
        case Kind::Digits: kind = "digits"; break;
        case Kind::Noise: kind = "noise"; break;
    }
    std::ostringstream os;
    os << kind << ":K=" << k << ",n=" << per_class << ",sigma=" << sigma << ",seed=" << seed;
    return os.str();
}

namespace {

constexpr int kImg = 28;       // digit canvas
constexpr double kBox = 22.0;  // glyph box inside the canvas
constexpr double kMargin = 3.0;

using Point = std::array<double, 2>;
using Stroke = std::vector<Point>;

struct Glyph {
    std::vector<Stroke> strokes;
};

Stroke arc(double cx, double cy, double rx, double ry, double deg0, double deg1, int steps = 28) {
    Stroke s;
    s.reserve(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) {
        const double a = (deg0 + (deg1 - deg0) * i / steps) * M_PI / 180.0;
        s.push_back({cx + rx * std::cos(a), cy - ry * std::sin(a)});
    }
    return s;
}

const std::array<Glyph, 10>& digit_glyphs() {
    static const std::array<Glyph, 10> glyphs = [] {
        std::array<Glyph, 10> g;
        g[0].strokes = {arc(0.50, 0.50, 0.27, 0.38, 90, 450)};
        g[1].strokes = {{{0.34, 0.26}, {0.52, 0.10}, {0.52, 0.90}}};
        {
            Stroke top = arc(0.50, 0.30, 0.26, 0.21, 180, -30);
            top.push_back({0.23, 0.90});
            top.push_back({0.79, 0.90});
            g[2].strokes = {std::move(top)};
        }
        g[3].strokes = {arc(0.48, 0.30, 0.24, 0.20, 150, -75),
                        arc(0.48, 0.68, 0.26, 0.22, 75, -150)};
        g[4].strokes = {{{0.62, 0.08}, {0.20, 0.60}, {0.85, 0.60}},
                        {{0.66, 0.32}, {0.66, 0.92}}};
        {
            Stroke cap{{0.74, 0.10}, {0.30, 0.10}, {0.27, 0.45}};
            g[5].strokes = {std::move(cap), arc(0.47, 0.66, 0.25, 0.23, 130, -125)};
        }
        g[6].strokes = {{{0.66, 0.08}, {0.50, 0.26}, {0.40, 0.44}, {0.355, 0.60}},
                        arc(0.50, 0.70, 0.155, 0.185, 90, 450)};
        g[7].strokes = {{{0.21, 0.12}, {0.79, 0.12}, {0.40, 0.92}}};
        g[8].strokes = {arc(0.50, 0.31, 0.155, 0.165, 90, 450),
                        arc(0.50, 0.69, 0.185, 0.195, 90, 450)};
        g[9].strokes = {arc(0.49, 0.33, 0.165, 0.175, 90, 450),
                        {{0.655, 0.36}, {0.625, 0.60}, {0.52, 0.92}}};
        return g;
    }();
    return glyphs;
}

void stamp(std::span<double> img, double px, double py, double pen, double intensity) {
    const double reach = 2.2 * pen;
    const int r0 = std::max(0, static_cast<int>(std::floor(py - reach)));
    const int r1 = std::min(kImg - 1, static_cast<int>(std::ceil(py + reach)));
    const int c0 = std::max(0, static_cast<int>(std::floor(px - reach)));
    const int c1 = std::min(kImg - 1, static_cast<int>(std::ceil(px + reach)));
    const double inv = 1.0 / (2.0 * pen * pen);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            const double d2 = (r - py) * (r - py) + (c - px) * (c - px);
            const double v = intensity * std::exp(-d2 * inv);
            auto& cell = img[static_cast<std::size_t>(r * kImg + c)];
            cell = std::max(cell, v);
        }
    }
}

void render_digit(std::span<double> img, int digit, double jitter, Rng& rng) {
    const Glyph& glyph = digit_glyphs()[static_cast<std::size_t>(digit)];
    const double theta = std::clamp(rng.normal(0.0, 9.0 * jitter), -25.0, 25.0) * M_PI / 180.0;
    const double sx = std::exp(rng.normal(0.0, 0.07 * jitter));
    const double sy = std::exp(rng.normal(0.0, 0.07 * jitter));
    const double shear = rng.normal(0.0, 0.08 * jitter);
    const double tx = rng.normal(0.0, 0.03 * jitter);
    const double ty = rng.normal(0.0, 0.03 * jitter);
    const double pen = 0.85 + 0.45 * rng.uniform();
    const double bright = 0.75 + 0.25 * rng.uniform();
    const double ct = std::cos(theta), st = std::sin(theta);

    auto transform = [&](const Point& p) -> Point {
        double dx = p[0] - 0.5, dy = p[1] - 0.5;
        dx += shear * dy;
        dx *= sx;
        dy *= sy;
        const double rx = ct * dx + st * dy;
        const double ry = -st * dx + ct * dy;
        return {kMargin + (0.5 + rx + tx) * kBox, kMargin + (0.5 + ry + ty) * kBox};
    };

    for (const Stroke& stroke : glyph.strokes) {
        for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
            const Point a = transform(stroke[i]);
            const Point b = transform(stroke[i + 1]);
            const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
            const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.35)));
            for (int s = 0; s <= steps; ++s) {
                const double t = static_cast<double>(s) / steps;
                stamp(img, a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), pen, bright);
            }
        }
    }
    const double noise = 0.18 * jitter;
    if (noise > 0.0) {
        for (auto& v : img) v = std::min(1.0, v + noise * rng.uniform());
    }
}

std::vector<Point> blob_centers(int k) {
    std::vector<Point> centers(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const double a = 2.0 * M_PI * i / k;
        centers[static_cast<std::size_t>(i)] = {4.0 * std::cos(a), 4.0 * std::sin(a)};
    }
    return centers;
}

}  // namespace

Dataset synth(const SyntheticSpec& spec) {
    Dataset data;
    data.name = spec.str();
    data.k = spec.k;
    data.label_ids.resize(static_cast<std::size_t>(spec.k));
    for (int i = 0; i < spec.k; ++i) data.label_ids[static_cast<std::size_t>(i)] = i;
    Rng rng(spec.seed);

    switch (spec.kind) {
        case SyntheticSpec::Kind::Blobs: {
            data.sample_shape = {2};
            const auto centers = blob_centers(spec.k);
            for (int c = 0; c < spec.k; ++c) {
                for (int i = 0; i < spec.per_class; ++i) {
                    data.values.push_back(centers[static_cast<std::size_t>(c)][0] +
                                          spec.sigma * rng.normal());
                    data.values.push_back(centers[static_cast<std::size_t>(c)][1] +
                                          spec.sigma * rng.normal());
                    data.labels.push_back(c);
                }
            }
            break;
        }
        case SyntheticSpec::Kind::BlobsOod: {
            // everything at least 10 sigma away from every center: the void
            // between the clusters when the margin leaves one, a distant
            // ring otherwise
            data.sample_shape = {2};
            const double margin = 10.0 * spec.sigma;
            const bool interior = margin < 3.5 && spec.k >= 2;
            const double r0 = 4.0 + margin + 1.0;
            const auto centers = blob_centers(spec.k);
            for (int c = 0; c < spec.k; ++c) {
                for (int i = 0; i < spec.per_class; ++i) {
                    double x = 0.0, y = 0.0;
                    if (interior) {
                        // stay in the deepest part of the void, well away
                        // from every cluster
                        for (;;) {
                            const double a = rng.uniform(0.0, 2.0 * M_PI);
                            const double r = 0.4 * (4.0 - margin) * std::sqrt(rng.uniform());
                            x = r * std::cos(a);
                            y = r * std::sin(a);
                            bool far_enough = true;
                            for (const auto& ctr : centers) {
                                const double dx = x - ctr[0], dy = y - ctr[1];
                                far_enough = far_enough && dx * dx + dy * dy >= margin * margin;
                            }
                            if (far_enough) break;
                        }
                    } else {
                        const double a = rng.uniform(0.0, 2.0 * M_PI);
                        const double r = rng.uniform(r0, r0 + 2.0);
                        x = r * std::cos(a);
                        y = r * std::sin(a);
                    }
                    data.values.push_back(x);
                    data.values.push_back(y);
                    data.labels.push_back(c);
                }
            }
            break;
        }
        case SyntheticSpec::Kind::Moons: {
            data.sample_shape = {2};
            for (int c = 0; c < 2; ++c) {
                for (int i = 0; i < spec.per_class; ++i) {
                    const double t = M_PI * rng.uniform();
                    double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
                    double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
                    data.values.push_back(x + spec.sigma * rng.normal());
                    data.values.push_back(y + spec.sigma * rng.normal());
                    data.labels.push_back(c);
                }
            }
            break;
        }
        case SyntheticSpec::Kind::Digits: {
            data.sample_shape = {kImg, kImg, 1};
            data.values.assign(static_cast<std::size_t>(spec.k) *
                                   static_cast<std::size_t>(spec.per_class) * kImg * kImg,
                               0.0);
            std::size_t offset = 0;
            for (int c = 0; c < spec.k; ++c) {
                for (int i = 0; i < spec.per_class; ++i) {
                    render_digit(std::span<double>(data.values.data() + offset, kImg * kImg), c,
                                 spec.sigma, rng);
                    data.labels.push_back(c);
                    offset += kImg * kImg;
                }
            }
            break;
        }
        case SyntheticSpec::Kind::Noise: {
            data.sample_shape = {kImg, kImg, 1};
            for (int c = 0; c < spec.k; ++c) {
                for (int i = 0; i < spec.per_class; ++i) {
                    for (int p = 0; p < kImg * kImg; ++p) data.values.push_back(rng.uniform());
                    data.labels.push_back(c);
                }
            }
            break;
        }
    }
    data.validate();
    return data;
}

namespace {

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw DataError("IDX '" + path + "': truncated header");
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError("IDX: cannot open images file '" + images_path + "'");
    const std::uint32_t img_magic = read_u32_be(img, images_path);
    if (img_magic != 2051) {
        throw DataError("IDX '" + images_path + "': wrong images magic " +
                        std::to_string(img_magic) + " (expected 2051)");
    }
    const std::uint32_t n = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
        throw DataError("IDX '" + images_path + "': implausible image extents " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("IDX: cannot open labels file '" + labels_path + "'");
    const std::uint32_t lab_magic = read_u32_be(lab, labels_path);
    if (lab_magic != 2049) {
        throw DataError("IDX '" + labels_path + "': wrong labels magic " +
                        std::to_string(lab_magic) + " (expected 2049)");
    }
    const std::uint32_t n_lab = read_u32_be(lab, labels_path);
    if (n != n_lab) {
        throw DataError("IDX: image count " + std::to_string(n) + " does not match label count " +
                        std::to_string(n_lab));
    }

    Dataset data;
    data.name = images_path;
    data.sample_shape = {static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols), 1};
    const std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
    const auto img_pos = img.tellg();
    img.seekg(0, std::ios::end);
    const auto img_end = img.tellg();
    img.seekg(img_pos);
    if (img_end - img_pos < static_cast<std::streamoff>(pixels)) {
        throw DataError("IDX '" + images_path + "': truncated pixel data");
    }
    std::vector<unsigned char> buf(pixels);
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (img.gcount() != static_cast<std::streamsize>(pixels)) {
        throw DataError("IDX '" + images_path + "': truncated pixel data");
    }
    data.values.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i) data.values[i] = buf[i] / 255.0;

    const auto lab_pos = lab.tellg();
    lab.seekg(0, std::ios::end);
    const auto lab_end = lab.tellg();
    lab.seekg(lab_pos);
    if (lab_end - lab_pos < static_cast<std::streamoff>(n_lab)) {
        throw DataError("IDX '" + labels_path + "': truncated label data");
    }
    std::vector<unsigned char> lbuf(n_lab);
    lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n_lab));
    if (lab.gcount() != static_cast<std::streamsize>(n_lab)) {
        throw DataError("IDX '" + labels_path + "': truncated label data");
    }
    int maxlab = 0;
    data.labels.resize(n_lab);
    for (std::size_t i = 0; i < n_lab; ++i) {
        data.labels[i] = lbuf[i];
        maxlab = std::max(maxlab, static_cast<int>(lbuf[i]));
    }
    data.k = maxlab + 1;
    data.label_ids.resize(static_cast<std::size_t>(data.k));
    for (int i = 0; i < data.k; ++i) data.label_ids[static_cast<std::size_t>(i)] = i;
    data.validate();
    return data;
}

void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path) {
    if (!data.is_image()) throw DataError("save_idx: dataset '" + data.name + "' is not images");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw DataError("IDX: cannot open '" + images_path + "' for writing");
    write_u32_be(img, 2051);
    write_u32_be(img, static_cast<std::uint32_t>(data.n()));
    write_u32_be(img, static_cast<std::uint32_t>(data.sample_shape[0]));
    write_u32_be(img, static_cast<std::uint32_t>(data.sample_shape[1]));
    for (double v : data.values) {
        const auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        img.write(reinterpret_cast<const char*>(&byte), 1);
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("IDX: cannot open '" + labels_path + "' for writing");
    write_u32_be(lab, 2049);
    write_u32_be(lab, static_cast<std::uint32_t>(data.n()));
    for (int l : data.labels) {
        const auto byte = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

Dataset filter_classes(const Dataset& data, const std::vector<int>& keep) {
    if (keep.empty()) throw ConfigError("filter_classes: empty class list");
    std::unordered_map<int, int> remap;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i] < 0 || keep[i] >= data.k) {
            throw ConfigError("filter_classes: class " + std::to_string(keep[i]) +
                              " outside dataset range [0," + std::to_string(data.k) + ")");
        }
        if (!remap.emplace(keep[i], static_cast<int>(i)).second) {
            throw ConfigError("filter_classes: duplicate class " + std::to_string(keep[i]));
        }
    }
    Dataset out;
    out.name = data.name + "/subset";
    out.sample_shape = data.sample_shape;
    out.k = static_cast<int>(keep.size());
    out.label_ids.reserve(keep.size());
    for (int c : keep) out.label_ids.push_back(data.label_ids[static_cast<std::size_t>(c)]);
    const std::int64_t d = data.flat_dim();
    for (std::int64_t i = 0; i < data.n(); ++i) {
        const auto it = remap.find(data.labels[static_cast<std::size_t>(i)]);
        if (it == remap.end()) continue;
        const auto s = data.sample(i);
        out.values.insert(out.values.end(), s.begin(), s.end());
        out.labels.push_back(it->second);
    }
    if (out.labels.empty()) throw ConfigError("filter_classes: no samples left after filtering");
    (void)d;
    out.validate();
    return out;
}

Tensor rotate(const Tensor& image, double degrees) {
    const auto& shape = image.shape();
    const bool chan = shape.size() == 3 && shape[2] == 1;
    if (!(shape.size() == 2 || chan) || shape[0] != shape[1]) {
        throw ShapeError("rotate: expected a square single-channel image, got " +
                         shape_str(shape));
    }
    const std::int64_t h = shape[0];
    const double cx = (static_cast<double>(h) - 1.0) / 2.0;
    const double theta = degrees * M_PI / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const auto src = image.values();
    std::vector<double> out(src.size(), 0.0);
    for (std::int64_t r = 0; r < h; ++r) {
        for (std::int64_t c = 0; c < h; ++c) {
            // inverse map: rotate the destination offset back by -theta
            const double dx = static_cast<double>(c) - cx;
            const double dy = static_cast<double>(r) - cx;
            const double sxf = cx + ct * dx - st * dy;
            const double syf = cx + st * dx + ct * dy;
            const auto x0 = static_cast<std::int64_t>(std::floor(sxf));
            const auto y0 = static_cast<std::int64_t>(std::floor(syf));
            const double fx = sxf - static_cast<double>(x0);
            const double fy = syf - static_cast<double>(y0);
            double acc = 0.0;
            for (int gy = 0; gy <= 1; ++gy) {
                for (int gx = 0; gx <= 1; ++gx) {
                    const std::int64_t xx = x0 + gx;
                    const std::int64_t yy = y0 + gy;
                    if (xx < 0 || xx >= h || yy < 0 || yy >= h) continue;
                    const double w = (gx ? fx : 1.0 - fx) * (gy ? fy : 1.0 - fy);
                    acc += w * src[static_cast<std::size_t>(yy * h + xx)];
                }
            }
            out[static_cast<std::size_t>(r * h + c)] = std::clamp(acc, 0.0, 1.0);
        }
    }
    return Tensor::from(shape, std::move(out));
}

RiskMatrix mnist_risk_matrix(int k) {
    std::vector<double> costs(static_cast<std::size_t>(k) * static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            costs[static_cast<std::size_t>(i * k + j)] =
                j > i ? static_cast<double>((i - j) * (i - j)) : static_cast<double>(i - j);
        }
    }
    return RiskMatrix(k, std::move(costs));
}

RiskMatrix grouped_risk_matrix(const std::vector<int>& groups,
                               const std::vector<double>& cross_costs) {
    const int k = static_cast<int>(groups.size());
    if (k < 2) throw ConfigError("grouped_risk_matrix: need at least 2 classes");
    int ngroups = 0;
    for (int g : groups) {
        if (g < 0) throw ConfigError("grouped_risk_matrix: negative group id");
        ngroups = std::max(ngroups, g + 1);
    }
    if (cross_costs.size() != static_cast<std::size_t>(ngroups) * static_cast<std::size_t>(ngroups)) {
        throw ConfigError("grouped_risk_matrix: expected " + std::to_string(ngroups * ngroups) +
                          " cross costs, got " + std::to_string(cross_costs.size()));
    }
    std::vector<double> costs(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0.0);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i == j) continue;  // R_kk = 0 takes precedence over the group cost
            costs[static_cast<std::size_t>(i * k + j)] =
                cross_costs[static_cast<std::size_t>(groups[static_cast<std::size_t>(i)] * ngroups +
                                                     groups[static_cast<std::size_t>(j)])];
        }
    }
    return RiskMatrix(k, std::move(costs));
}

RiskMatrix cifar_grouped_risk_matrix() {
    // classes 0,1,8,9 are vehicles (group 0), the rest animals (group 1)
    const std::vector<int> groups = {0, 0, 1, 1, 1, 1, 1, 1, 0, 0};
    // row = true group, column = predicted group
    const std::vector<double> cross = {1.0, 50.0,
                                       10.0, 1.0};
    return grouped_risk_matrix(groups, cross);
}

}  // namespace edl
