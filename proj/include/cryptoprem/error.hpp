#pragma once

#include <stdexcept>
#include <string>

namespace cryptoprem {

// Each error family maps to one CLI exit status (1, 2, 3).

/// Invalid configuration or command-line usage.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed, missing or misaligned input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Singular systems, degenerate series, failed convergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cryptoprem
