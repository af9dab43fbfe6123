#pragma once

#include <stdexcept>
#include <string>

namespace arbor {

/// Input that violates a documented precondition or schema.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// A requested size exceeds a hard enumeration bound.
struct capacity_error : validation_error {
    explicit capacity_error(const std::string& what) : validation_error(what) {}
};

/// A numerical routine failed to converge or hit a degenerate configuration.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace arbor
