#pragma once

#include <stdexcept>
#include <string>

namespace nacl {

// Input has the wrong shape for the model or dataset it is used with.
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input value lies outside the domain of the operation (boundary
// probabilities, nonpositive GP variables, out-of-range rates, ...).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Numerical procedure failed (solver did not converge, degenerate data).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nacl
