#pragma once

#include <functional>
#include <vector>

#include "richness/families.hpp"
#include "richness/fit.hpp"

namespace richness::detail {

// Coordinate transform from an unconstrained search variable u to theta.
enum class Coord { log, logit, linear };

struct BoxProblem {
  std::vector<Coord> coords;
  std::vector<Bounds> bounds;
  // Maximized. Must return -inf (or NaN) outside the family domain.
  std::function<double(const Theta&)> objective;
  std::function<std::vector<double>(const Theta&)> gradient;
  // Residual is max |gradient_j| / scale over coordinates not pinned at a bound.
  double scale = 1.0;
};

struct BoxResult {
  Theta theta;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool on_boundary = false;
};

// Projected BFGS in the transformed coordinates, switching to Newton steps
// (finite-difference Hessian of the analytic gradient) once BFGS stalls or
// the residual is small.
BoxResult maximize_box(const BoxProblem& problem, const Theta& start, double tol,
                       int max_iter);

}  // namespace richness::detail
