#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace comove {

// Root of the library's exception hierarchy. The CLI maps ValidationError
// subclasses to exit code 2 and NumericError to exit code 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// Parameters outside the domain of a formula (pole, negative strength, ...).
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Zero denominator in the evolution matrix normalisation.
class DegenerateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Moment inversion outside the model's range.
class MomentRangeError : public ValidationError {
public:
    enum class Side { VarianceTooSmall, VarianceTooLarge, MeanOutOfRange };

    MomentRangeError(Side side, double c2, const std::string& what)
        : ValidationError(what), side_(side), c2_(c2) {}

    Side side() const noexcept { return side_; }
    double c2() const noexcept { return c2_; }

private:
    Side side_;
    double c2_;
};

// A statistical fit could not be produced (inversion failure, too few days).
class FitError : public ValidationError {
public:
    FitError(const std::string& what, double c2 = 0.0) : ValidationError(what), c2_(c2) {}
    double c2() const noexcept { return c2_; }

private:
    double c2_;
};

// Input text that does not follow a file-format contract.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace comove
