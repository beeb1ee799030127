#pragma once

#include <stdexcept>
#include <string>

namespace ssanova {

/// Numerical degeneracy (singular system); maps to CLI exit code 2.
struct DegeneracyError : std::runtime_error {
  explicit DegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ssanova
