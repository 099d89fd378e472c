#include "visco/errors.hpp"

#include <sstream>
#include <utility>

namespace visco {

namespace {

std::string describe_parse_error(std::size_t position, const std::vector<std::string>& expected,
                                 const std::string& detail)
{
    std::ostringstream os;
    os << "parse error at position " << position << ": " << detail;
    if (!expected.empty()) {
        os << " (expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i > 0) os << ", ";
            os << expected[i];
        }
        os << ")";
    }
    return os.str();
}

} // namespace

ParseError::ParseError(std::size_t position, std::vector<std::string> expected, const std::string& detail)
    : Error(describe_parse_error(position, expected, detail))
    , position_(position)
    , expected_(std::move(expected))
{
}

ExponentOutOfRange::ExponentOutOfRange(std::string which, double value, std::string allowed)
    : Error(which + " = " + std::to_string(value) + " is outside the admissible range " + allowed)
    , which_(std::move(which))
    , value_(value)
    , allowed_(std::move(allowed))
{
}

QTooSmall::QTooSmall(double q, double q_min)
    : Error("exponent q = " + std::to_string(q) + " is below the admissible minimum (alpha+2)/(alpha+1) = "
            + std::to_string(q_min))
    , q_(q)
    , q_min_(q_min)
{
}

MaxItersExceeded::MaxItersExceeded(int iterations, double residual)
    : Error("solver did not converge in " + std::to_string(iterations) + " iterations (last residual "
            + std::to_string(residual) + ")")
    , iterations_(iterations)
    , residual_(residual)
{
}

} // namespace visco
