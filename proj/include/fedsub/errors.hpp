#pragma once

#include <stdexcept>
#include <string>

namespace fedsub {

// Input tensor/matrix dimensions do not line up.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Empty datasets, labels outside the task universe, and similar data problems.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid algorithm parameter (k out of range, bad sample count, ...).
struct ParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed CSV or config text; message carries the offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Semantically invalid experiment configuration (unknown key, bad value).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace fedsub
