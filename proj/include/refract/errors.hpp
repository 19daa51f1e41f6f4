#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace refract {

/// Violation of one of the model's standing assumptions
/// (finite mean, c > delta, beta > 1, generator validity, payoff shape).
class AssumptionError : public std::runtime_error {
public:
    AssumptionError(std::string assumption, const std::string& detail)
        : std::runtime_error(assumption + ": " + detail), assumption_(std::move(assumption)) {}

    const std::string& assumption() const noexcept { return assumption_; }

private:
    std::string assumption_;
};

/// Numerical failure with diagnostics (root bracketing, inversion contour,
/// non-finite accumulator, iteration cap).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input document (CLI model files).
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string path, const std::string& detail)
        : std::runtime_error(path + ": " + detail), path_(std::move(path)) {}

    /// JSON-pointer-like path of the offending field.
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace refract
