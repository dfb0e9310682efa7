#pragma once

namespace edl::special {

// log Gamma(x) for x > 0, Lanczos approximation (g=7, 9 coefficients).
// Absolute error below 1e-10 over the positive axis.
double lgamma(double x);

// psi(x) = d/dx log Gamma(x), recurrence up-shift plus asymptotic series.
double digamma(double x);

// psi'(x), same scheme; needed as the derivative of digamma in backprop.
double trigamma(double x);

}  // namespace edl::special
