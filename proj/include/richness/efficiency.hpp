#pragma once

#include <Eigen/Core>

#include "richness/counts.hpp"
#include "richness/families.hpp"

namespace richness {

/// Efficient score (q-component first, then theta) at one abundance x >= 1.
/// Constant for all x > tau. Requires q R(0) < 1 and q sum_{0..tau} R < 1.
Eigen::VectorXd efficient_score(const Family& family, const Theta& theta, double q,
                                int tau, Abundance x);

/// Efficient Fisher information in closed form, same ordering as the score.
Eigen::MatrixXd fisher_information(const Family& family, const Theta& theta,
                                   double q, int tau);

/// max_j |sum_x n_x score_j(x)| / D.
double score_residual(const CountData& data, const Family& family,
                      const Theta& theta, double q, int tau);

struct AsymptoticCovariance {
  Eigen::MatrixXd covariance;  // I^{-1} / d
  double se_n = 0.0;           // delta method on D / (1 - q R(0)), D held fixed
  double condition = 0.0;
};

// Throws NumericalError when the information has condition number >= 1e12.
AsymptoticCovariance asymptotic_covariance(const Family& family, const Theta& theta,
                                           double q, int tau, Frequency d);

}  // namespace richness
