#pragma once

#include <stdexcept>
#include <string>

namespace hopencls {

// Shape/dimension mismatch between tensors or network layers.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Caller violated an API precondition (bad label index, missing cache, ...).
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite values fed into a numeric routine.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration (priors that do not sum to one, bad flag combos, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / serialization failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input data; message carries the offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training diverged or produced non-finite values.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hopencls
