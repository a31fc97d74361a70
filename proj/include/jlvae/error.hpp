#pragma once

#include <stdexcept>
#include <string>

namespace jlvae {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension/shape disagreements between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Bad values: NaN/Inf where finite required, out-of-range arguments.
class ValueError : public Error {
public:
    using Error::Error;
};

// File and directory problems.
class IoError : public Error {
public:
    using Error::Error;
};

// Invalid or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A loss term went NaN/Inf; carries the name of the offending term.
class NonFiniteError : public Error {
public:
    NonFiniteError(std::string term, const std::string& message)
        : Error(message), term_(std::move(term)) {}

    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

}  // namespace jlvae
