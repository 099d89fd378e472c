#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace visco {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t position, std::vector<std::string> expected, const std::string& detail);

    std::size_t position() const noexcept { return position_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::vector<std::string> expected_;
};

/// |p| = 0 with eps = 0 and a negative gradient exponent.
class SingularGradient : public Error {
public:
    using Error::Error;
};

class FieldEvalError : public Error {
public:
    using Error::Error;
};

class ExponentOutOfRange : public Error {
public:
    ExponentOutOfRange(std::string which, double value, std::string allowed);

    const std::string& which() const noexcept { return which_; }
    double value() const noexcept { return value_; }
    const std::string& allowed() const noexcept { return allowed_; }

private:
    std::string which_;
    double value_;
    std::string allowed_;
};

class UnboundedCoefficient : public Error {
public:
    using Error::Error;
};

class OutsideDomain : public Error {
public:
    using Error::Error;
};

class SpacingTooCoarse : public Error {
public:
    using Error::Error;
};

class CriticalBeta : public Error {
public:
    using Error::Error;
};

class CrownOutsideDomain : public Error {
public:
    using Error::Error;
};

class DeltaTooLarge : public Error {
public:
    using Error::Error;
};

class NonAffineBoundaryDatum : public Error {
public:
    using Error::Error;
};

class BracketViolated : public Error {
public:
    using Error::Error;
};

class QTooSmall : public Error {
public:
    QTooSmall(double q, double q_min);

    double q() const noexcept { return q_; }
    double q_min() const noexcept { return q_min_; }

private:
    double q_;
    double q_min_;
};

class NotStrictMinimum : public Error {
public:
    using Error::Error;
};

class BoundaryOrderViolated : public Error {
public:
    using Error::Error;
};

class SignViolation : public Error {
public:
    using Error::Error;
};

/// The solver ran out of iterations; carries the last residual norm.
class MaxItersExceeded : public Error {
public:
    MaxItersExceeded(int iterations, double residual);

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

} // namespace visco
