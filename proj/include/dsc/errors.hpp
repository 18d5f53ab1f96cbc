#pragma once

#include <stdexcept>
#include <string>

namespace dsc {

/// Malformed arguments: wrong shapes, out-of-range parameters, non-stochastic operators.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad configuration keys or values, unknown modes, non-mirrored layer widths.
class InvalidConfig : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite losses, eigensolver non-convergence.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed IDX/CSV/checkpoint files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dsc
