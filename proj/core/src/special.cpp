#include "edl/special.hpp"

#include <cmath>
#include <limits>

namespace edl::special {

namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

// Lanczos, g=7, kmax=8.
constexpr double kLanczos[9] = {
    0.99999999999980993227684700473478,
    676.520368121885098567009190444019,
    -1259.13921672240287047156078755283,
    771.3234287776530788486528258894,
    -176.61502916214059906584551354,
    12.507343278686904814458936853,
    -0.13857109526572011689554707,
    9.984369578019570859563e-6,
    1.50563273514931155834e-7,
};

}  // namespace

double lgamma(double x) {
    if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    if (x < 0.5) {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::log(M_PI / std::sin(M_PI * x)) - lgamma(1.0 - x);
    }
    const double z = x - 1.0;
    double ag = kLanczos[0];
    for (int k = 1; k <= 8; ++k) ag += kLanczos[k] / (z + k);
    const double t = z + 7.5;
    return (z + 0.5) * std::log(t) - t + kLogSqrtTwoPi + std::log(ag);
}

double digamma(double x) {
    if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double result = 0.0;
    // shift to x >= 10: psi(x) = psi(x+1) - 1/x
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // asymptotic: ln x - 1/(2x) - sum B_2n / (2n x^2n)
    double series = inv2 * (1.0 / 12.0
                  - inv2 * (1.0 / 120.0
                  - inv2 * (1.0 / 252.0
                  - inv2 * (1.0 / 240.0
                  - inv2 * (1.0 / 132.0
                  - inv2 * (691.0 / 32760.0
                  - inv2 * (1.0 / 12.0)))))));
    return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
    if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double result = 0.0;
    // shift to x >= 10: psi'(x) = psi'(x+1) + 1/x^2
    while (x < 10.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 1.0
                  + inv * 0.5
                  + inv2 * (1.0 / 6.0
                  - inv2 * (1.0 / 30.0
                  - inv2 * (1.0 / 42.0
                  - inv2 * (1.0 / 30.0
                  - inv2 * (5.0 / 66.0
                  - inv2 * (691.0 / 2730.0
                  - inv2 * (7.0 / 6.0)))))));
    return result + inv * series;
}

}  // namespace edl::special
