#pragma once

#include <span>

namespace metastab::special {

/// log(erfc(x)) without underflow for large positive x.
double log_erfc(double x);

/// Scaled complementary error function exp(x^2) erfc(x), for x >= 0.
double erfcx(double x);

/// A signed quantity stored as (sign, log|value|). sign == 0 means zero.
struct SignedLog {
    int sign = 0;
    double log_abs = 0.0;

    static SignedLog from(double v);
    double value() const;
};

/// Sum of signed log-magnitude terms with the common maximum factored out.
SignedLog signed_log_sum(std::span<const SignedLog> terms);

/// Reference values for the Gaussian tail integral T(z) = int_z^inf e^{-s^2/2} ds
/// together with the classical Mills-ratio bounds
///   z/(1+z^2) e^{-z^2/2} <= T(z) <= e^{-z^2/2}/z,   z > 0.
struct GaussianTail {
    double lower;
    double value;
    double upper;
};

GaussianTail gaussian_tail_bounds(double z);

}  // namespace metastab::special
