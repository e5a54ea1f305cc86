#pragma once

#include <vector>

#include "richness/counts.hpp"
#include "richness/families.hpp"
#include "richness/fit.hpp"

namespace richness::detail {

// n_x for x = 0..tau (n[0] = 0) as doubles, plus D_tau.
struct RareCounts {
  int tau = 0;
  std::vector<double> n;
  double total = 0.0;
};

RareCounts rare_counts(const CountData& data, int tau);

// Truncated log-likelihood sum_x n_x log S(x); -inf outside the domain.
double rare_loglik(const RareCounts& rare, const Family& family, const Theta& theta);
std::vector<double> rare_score(const RareCounts& rare, const Family& family,
                               const Theta& theta);

ThetaFit fit_negbin(const RareCounts& rare, const std::vector<Bounds>& bounds,
                    const FitOptions& options);
ThetaFit fit_mixture(const CountData& data, const RareCounts& rare,
                     const Family& family, const std::vector<Bounds>& bounds,
                     const FitOptions& options);

}  // namespace richness::detail
