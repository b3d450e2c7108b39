#pragma once

#include <stdexcept>
#include <string>

namespace optmarl {

// Raised when a configuration (shapes, env parameters, run keys) is invalid.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when an API is called in a way its preconditions forbid.
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace optmarl
