#pragma once

#include <stdexcept>
#include <string>

namespace bq {

// Shape/extent disagreement between operands.
struct DimError : std::invalid_argument {
  explicit DimError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Caller violated a documented input requirement (range, size, bitwidth).
struct PreconditionError : std::invalid_argument {
  explicit PreconditionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Internal contract broken (non-scalar backward root, mismatched tables, ...).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Training produced non-finite values.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unreadable file.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bq
