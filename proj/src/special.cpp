#include "metastab/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "metastab/error.hpp"

namespace metastab::special {

namespace {

// Beyond this point erfc(x) drops below ~1e-300 and the asymptotic
// expansion of erfcx is accurate to round-off.
constexpr double kAsymptoticStart = 26.0;

double erfcx_asymptotic(double x) {
    // erfcx(x) ~ 1/(x sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2x^2)^k
    const double inv = 1.0 / (2.0 * x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 12; ++k) {
        term *= -(2.0 * k - 1.0) * inv;
        sum += term;
        if (std::abs(term) < 1e-17) break;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

}  // namespace

double log_erfc(double x) {
    if (x < kAsymptoticStart) return std::log(std::erfc(x));
    return std::log(erfcx_asymptotic(x)) - x * x;
}

double erfcx(double x) {
    if (x < 0.0) throw ConfigError("erfcx: defined here for x >= 0 only");
    if (x < kAsymptoticStart) return std::exp(x * x) * std::erfc(x);
    return erfcx_asymptotic(x);
}

SignedLog SignedLog::from(double v) {
    if (v == 0.0) return {};
    return {v > 0.0 ? 1 : -1, std::log(std::abs(v))};
}

double SignedLog::value() const {
    if (sign == 0) return 0.0;
    return sign * std::exp(log_abs);
}

SignedLog signed_log_sum(std::span<const SignedLog> terms) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) {
        if (t.sign != 0) top = std::max(top, t.log_abs);
    }
    if (!std::isfinite(top)) return {};
    double acc = 0.0;
    for (const auto& t : terms) {
        if (t.sign != 0) acc += t.sign * std::exp(t.log_abs - top);
    }
    if (acc == 0.0) return {};
    return {acc > 0.0 ? 1 : -1, top + std::log(std::abs(acc))};
}

GaussianTail gaussian_tail_bounds(double z) {
    if (!(z > 0.0)) throw ConfigError("gaussian_tail_bounds: z must be positive");
    const double g = std::exp(-0.5 * z * z);
    const double value = std::sqrt(std::numbers::pi / 2.0) * std::erfc(z / std::numbers::sqrt2);
    return {z / (1.0 + z * z) * g, value, g / z};
}

}  // namespace metastab::special
