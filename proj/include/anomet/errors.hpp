#pragma once

#include <stdexcept>
#include <string>

namespace anomet {

// Bad operator input: malformed config syntax, unknown override key.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data failed a structural or semantic check: malformed manifest,
// split leak, infeasible generator config, out-of-range hyperparameter.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// An input that is syntactically fine but has no usable content, e.g. a
// zero vector where a direction is required.
class DegenerateInputError : public ValidationError {
public:
    explicit DegenerateInputError(const std::string& msg) : ValidationError(msg) {}
};

// A quantity that must stay finite did not (diverged loss, NaN gradient).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace anomet
