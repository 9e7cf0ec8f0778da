#pragma once

#include <stdexcept>
#include <string>

namespace metastab {

/// Invalid arguments or parameter sets (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a trustworthy result: positivity loss,
/// non-convergence, NaN (maps to CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cole-Hopf style denominator hit zero or went negative.
class PositivityError : public NumericalError {
public:
    PositivityError(const std::string& what, double xi, double margin)
        : NumericalError(what), xi_(xi), margin_(margin) {}

    double xi() const { return xi_; }
    double margin() const { return margin_; }

private:
    double xi_;
    double margin_;
};

}  // namespace metastab
