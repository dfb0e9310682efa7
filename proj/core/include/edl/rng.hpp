#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace edl {

// Seeded random stream. All distributions are implemented on top of the
// raw 64-bit generator so draw sequences are identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1)
    double uniform_pos() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n);

    // standard normal, Marsaglia polar method (spare discarded)
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Gamma(shape, 1), Marsaglia-Tsang squeeze with the shape<1 boost
    double gamma(double shape);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace edl
