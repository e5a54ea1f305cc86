#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fit_internal.hpp"
#include "optimize.hpp"
#include "richness/errors.hpp"

namespace richness::detail {

namespace {

Theta clamp_into(const Theta& t, const std::vector<Bounds>& bounds) {
  Theta out = t;
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = std::clamp(out[j], bounds[j].lo, bounds[j].hi);
  return out;
}

// Moment start from the truncated sample, ignoring truncation.
Theta moment_start(const RareCounts& rare) {
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t x = 1; x < rare.n.size(); ++x) {
    s1 += rare.n[x] * static_cast<double>(x);
    s2 += rare.n[x] * static_cast<double>(x * x);
  }
  const double m = s1 / rare.total;
  const double v = s2 / rare.total - m * m;
  if (v > m) return Theta{m * m / (v - m), m / v};
  return Theta{9.0 * m, 0.9};
}

}  // namespace

ThetaFit fit_negbin(const RareCounts& rare, const std::vector<Bounds>& bounds,
                    const FitOptions& options) {
  const Family fam = Family::negative_binomial();
  BoxProblem problem;
  problem.coords = {Coord::log, Coord::logit};
  problem.bounds = bounds;
  problem.objective = [&](const Theta& t) { return rare_loglik(rare, fam, t); };
  problem.gradient = [&](const Theta& t) { return rare_score(rare, fam, t); };
  problem.scale = rare.total;

  std::vector<Theta> starts;
  if (options.start) {
    starts.push_back(*options.start);
  } else {
    starts = {moment_start(rare), Theta{1.0, 0.5}, Theta{5.0, 0.5}};
  }

  bool found = false;
  BoxResult best;
  double worst_residual = 0.0;
  int total_iter = 0;
  for (const auto& s : starts) {
    const BoxResult r =
        maximize_box(problem, clamp_into(s, bounds), options.solver_tol, options.max_iter);
    total_iter += r.iterations;
    if (!r.converged) {
      worst_residual = std::max(worst_residual, r.residual);
      continue;
    }
    if (!found || r.value > best.value) {
      best = r;
      found = true;
    }
  }
  if (!found)
    throw NumericalError("negative binomial fit did not converge (residual " +
                         std::to_string(worst_residual) + ")");
  ThetaFit fit;
  fit.theta = best.theta;
  fit.on_boundary = best.on_boundary;
  fit.iterations = total_iter;
  fit.gradient_residual = best.residual;
  return fit;
}

}  // namespace richness::detail
