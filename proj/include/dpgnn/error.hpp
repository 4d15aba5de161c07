#pragma once

#include <stdexcept>
#include <string>

namespace dpgnn {

// Bad input data, files or configuration. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure at run time (divergence, non-finite gradients, sampling
// budget exhausted). The CLI maps these to exit code 1.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpgnn
