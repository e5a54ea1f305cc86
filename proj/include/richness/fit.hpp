#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "richness/counts.hpp"
#include "richness/families.hpp"

namespace richness {

struct Bounds {
  double lo;
  double hi;
};

// Box bounds on theta used when FitOptions::theta_bounds is empty.
std::vector<Bounds> default_bounds(const Family& family);

struct FitOptions {
  int tau = 2;
  std::vector<Bounds> theta_bounds;  // empty: default_bounds(family)
  double solver_tol = 1e-10;         // on max |truncated score| / D_tau
  int max_iter = 500;
  double em_tol = 1e-9;              // relative log-likelihood change (mixtures)
  // Single starting point replacing the family's default starts.
  std::optional<Theta> start;
};

struct ThetaFit {
  Theta theta;
  bool on_boundary = false;
  int iterations = 0;
  // max_j |d/dtheta_j log prod S^tau(x)^{n_x}| / D_tau over free coordinates.
  double gradient_residual = 0.0;
};

// Throws InputError unless tau >= family.tau_min().
void validate_tau(const Family& family, int tau);

/// Conditional MLE of theta: maximizes prod_{x=1..tau} S_theta^tau(x)^{n_x}.
/// Poisson uses bisection on the truncated moment equation, negbin a
/// projected quasi-Newton search, mixtures an EM followed by Newton polish.
ThetaFit fit_theta(const CountData& data, const Family& family,
                   const FitOptions& options);

double truncated_loglik(const CountData& data, const Family& family,
                        const Theta& theta, int tau);
// Gradient of truncated_loglik.
std::vector<double> truncated_score(const CountData& data, const Family& family,
                                    const Theta& theta, int tau);

// rare_mean * (P(tau) - e^{-rate}) / P(tau - 1), P the Poisson cdf. The
// truncated Poisson MLE is a fixed point of this map.
double poisson_fixed_point_map(double rate, double rare_mean, int tau);

struct MixtureEm {
  Theta theta;
  std::vector<double> loglik;  // truncated log-likelihood after each iteration
  int iterations = 0;
  bool converged = false;
};

// EM for the tau-truncated Poisson mixture, from `start`.
MixtureEm mixture_em(const CountData& data, const Family& family, int tau,
                     const Theta& start, int max_iter, double em_tol);
// Deterministic EM start: rates spread geometrically over [m/J, m*J], m the
// truncated mean; uniform weights.
Theta mixture_start(const CountData& data, const Family& family, int tau);

struct QEstimate {
  double value;  // min(raw, 1)
  bool clamped;
  double raw;
};

QEstimate q_hat(const CountData& data, const Family& family, const Theta& theta,
                int tau);

// Pseudo-estimate of the abundant-species mass at x > tau. May be negative.
double f_pseudo(const CountData& data, const Family& family, const Theta& theta,
                double q, int tau, Abundance x);

double n_hat(Frequency d, const Family& family, const Theta& theta, double q);
// Pure-truncation estimate D_tau / (1 - R(0)) + (D - D_tau).
double n_classical(const CountData& data, const Family& family,
                   const Theta& theta, int tau);

double chao(const CountData& data);
double zelterman_theta(const CountData& data);

struct FitResult {
  Family family = Family::poisson();
  int tau = 0;
  Theta theta_hat;
  bool theta_on_boundary = false;
  double q_hat = 0.0;
  bool q_clamped = false;
  double q_raw = 0.0;
  double p0_hat = 0.0;  // q_hat * R(0)
  double n_hat = 0.0;
  double n_classical = 0.0;
  Frequency d = 0;
  Frequency d_tau = 0;
  int iterations = 0;
  double gradient_residual = 0.0;
  std::optional<double> score_residual;
  std::optional<Eigen::MatrixXd> asym_cov;
  std::optional<double> se_n;
  std::vector<std::string> notes;
};

/// theta_hat -> q_hat(theta_hat) -> N_hat, plus the classical estimate at the
/// same tau. Diagnostics add the efficient-score residual and the asymptotic
/// covariance; a singular information matrix is recorded in `notes`.
FitResult fit_full(const CountData& data, const Family& family,
                   const FitOptions& options, bool with_diagnostics);

}  // namespace richness
