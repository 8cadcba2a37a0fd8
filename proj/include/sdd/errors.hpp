#pragma once

#include <stdexcept>
#include <string>

namespace sdd {

// Configuration that violates a model invariant (CLI exit code 2).
class InvalidConfig : public std::invalid_argument {
 public:
  explicit InvalidConfig(const std::string& what) : std::invalid_argument(what) {}
};

// File could not be read/written or has the wrong schema (CLI exit code 3).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sdd
