#pragma once

#include <stdexcept>
#include <string>

namespace richness {

// Bad input data or arguments. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not produce a valid answer (non-convergence,
// singular information, degenerate data). The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No species with abundance <= tau, so the rare component cannot be fitted.
class InsufficientRareData : public NumericalError {
 public:
  explicit InsufficientRareData(int tau)
      : NumericalError("insufficient rare data: no species with abundance <= " +
                       std::to_string(tau)) {}
};

}  // namespace richness
