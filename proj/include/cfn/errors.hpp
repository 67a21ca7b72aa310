#pragma once

#include <stdexcept>
#include <string>

namespace cfn {

// Degenerate arithmetic: vanishing message denominators, zero pattern
// probability at a parameter boundary, non-finite objectives.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent experiment configuration.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cfn
