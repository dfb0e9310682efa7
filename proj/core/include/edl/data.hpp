#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edl/risk_matrix.hpp"
#include "edl/tensor.hpp"

namespace edl {

// In-memory dataset: N flat samples with local labels in [0,K). label_ids
// maps local labels to global class ids (identity unless classes were
// filtered), so models trained on a subset keep their global identities.
struct Dataset {
    std::string name;
    Shape sample_shape;          // per-sample shape, e.g. {28,28,1} or {2}
    std::vector<double> values;  // n * flat_dim, row-major
    std::vector<int> labels;     // size n, local
    int k = 0;
    std::vector<int> label_ids;  // size k, local -> global

    std::int64_t n() const { return static_cast<std::int64_t>(labels.size()); }
    std::int64_t flat_dim() const { return shape_size(sample_shape); }
    std::span<const double> sample(std::int64_t i) const;
    // [B, flat_dim] input tensor for the given sample indices
    Tensor batch(std::span<const std::int64_t> idx) const;
    bool is_image() const { return sample_shape.size() == 3; }

    // checks the structural invariants; throws DataError on violation
    void validate() const;
};

struct SyntheticSpec {
    enum class Kind { Blobs, BlobsOod, Moons, Digits, Noise };
    Kind kind = Kind::Blobs;
    int k = 3;
    int per_class = 200;
    double sigma = 0.1;
    std::uint64_t seed = 1;

    // "blobs:K=3,n=200,sigma=0.1" (kind in blobs|blobs-ood|moons|digits|noise;
    // n is the per-class count; seed may be overridden with seed=...)
    static SyntheticSpec parse(const std::string& s);
    std::string str() const;
};

// Deterministic synthetic datasets.
//  - blobs: isotropic Gaussians at fixed centers on a circle of radius 4
//  - blobs-ood: points on a far ring, >= 10 sigma away from every center
//  - moons: two interleaved half-circles (K must be 2)
//  - digits: rendered 28x28 digit glyphs with affine jitter and pixel noise;
//    sigma scales the distortion (1.0 gives a task with a realistic error rate)
//  - noise: uniform-noise 28x28 images (out-of-distribution stand-in)
Dataset synth(const SyntheticSpec& spec);

// IDX ingestion (big-endian magic 2051 for images, 2049 for labels);
// pixel bytes are scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
// Writes a dataset back out as an IDX pair (images quantized to bytes).
void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path);

// Keeps only the listed global classes and remaps labels to local indices;
// label_ids records the original ids.
Dataset filter_classes(const Dataset& data, const std::vector<int>& keep);

// Rotation about the image center, counterclockwise positive, bilinear
// interpolation with zero fill; output clipped to [0,1]. Input must be a
// square single-channel image ([H,W] or [H,W,1]).
Tensor rotate(const Tensor& image, double degrees);

// R[i][j] = (i-j)^2 if j > i, else (i-j): overvaluing is quadratic,
// undervaluing linear, diagonal zero.
RiskMatrix mnist_risk_matrix(int k = 10);

// groups[c] is the group id of class c; cross_costs is G x G row-major with
// cross_costs[g][h] the cost of predicting group h for true group g (the
// diagonal holds the same-group cost). Class-level diagonal is forced to 0.
RiskMatrix grouped_risk_matrix(const std::vector<int>& groups,
                               const std::vector<double>& cross_costs);

// The 10-class vehicles/animals instance: same group 1, true animal
// predicted vehicle 10, true vehicle predicted animal 50.
RiskMatrix cifar_grouped_risk_matrix();

}  // namespace edl
