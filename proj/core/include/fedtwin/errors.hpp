#pragma once

#include <stdexcept>
#include <string>

namespace fedtwin {

// Invalid configuration or malformed input; the CLI maps this to exit code 2.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at run time (integration blow-up, training divergence);
// the CLI maps this to exit code 3.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedtwin
