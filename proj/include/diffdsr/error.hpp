#pragma once

#include <stdexcept>
#include <string>

namespace diffdsr {

// Failure classes surfaced by the command-line front end as distinct exit
// codes. Precondition violations inside the numeric core use
// std::invalid_argument / std::domain_error directly.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail

}  // namespace diffdsr
