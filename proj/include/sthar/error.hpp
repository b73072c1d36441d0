#pragma once

#include <stdexcept>
#include <string>

namespace sthar {

// Shape disagreement between tensors (bad matmul extents, conv kernel too big, ...).
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Violated call contract (empty sequence, non-scalar backward root, bad label, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent configuration detected at construction time.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf where finite values are required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset / checkpoint file problems; message names the offending path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sthar
