#pragma once

#include <stdexcept>
#include <string>

namespace clustercal {

// Bad input data, arguments or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while executing an otherwise valid request (non-finite objective,
// I/O failure after validation, ...). The CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clustercal
