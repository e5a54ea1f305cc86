#include "richness/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fit_internal.hpp"
#include "richness/efficiency.hpp"
#include "richness/errors.hpp"

namespace richness {

namespace detail {

RareCounts rare_counts(const CountData& data, int tau) {
  RareCounts rare;
  rare.tau = tau;
  rare.n.assign(static_cast<std::size_t>(tau) + 1, 0.0);
  for (const auto& [x, nx] : data.frequencies()) {
    if (x > static_cast<Abundance>(tau)) break;
    rare.n[x] = static_cast<double>(nx);
    rare.total += static_cast<double>(nx);
  }
  return rare;
}

namespace {

// log sum_{x=1..tau} exp(log_mass[x])
double log_rare_mass(const std::vector<double>& log_mass) {
  const double top = *std::max_element(log_mass.begin() + 1, log_mass.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (std::size_t x = 1; x < log_mass.size(); ++x) s += std::exp(log_mass[x] - top);
  return top + std::log(s);
}

}  // namespace

double rare_loglik(const RareCounts& rare, const Family& family, const Theta& theta) {
  if (!in_domain(family, theta)) return -std::numeric_limits<double>::infinity();
  const auto lr = log_range(family, theta, rare.tau, false);
  const double lse = log_rare_mass(lr.log_mass);
  double ll = 0.0;
  for (std::size_t x = 1; x < rare.n.size(); ++x)
    if (rare.n[x] > 0.0) ll += rare.n[x] * (lr.log_mass[x] - lse);
  return std::isnan(ll) ? -std::numeric_limits<double>::infinity() : ll;
}

std::vector<double> rare_score(const RareCounts& rare, const Family& family,
                               const Theta& theta) {
  const auto k = family.param_dim();
  std::vector<double> score(k, 0.0);
  if (!in_domain(family, theta)) {
    score.assign(k, std::numeric_limits<double>::quiet_NaN());
    return score;
  }
  const auto lr = log_range(family, theta, rare.tau, true);
  const double lse = log_rare_mass(lr.log_mass);
  for (std::size_t x = 1; x < rare.n.size(); ++x) {
    const double s = std::exp(lr.log_mass[x] - lse);
    for (std::size_t j = 0; j < k; ++j) {
      if (rare.n[x] > 0.0) score[j] += rare.n[x] * lr.grad_log[x][j];
      if (s > 0.0) score[j] -= rare.total * s * lr.grad_log[x][j];
    }
  }
  return score;
}

}  // namespace detail

namespace {

// Mean of the Poisson(rate) law conditioned on 1 <= X <= tau.
double poisson_truncated_mean(double rate, int tau) {
  const double log_rate = std::log(rate);
  std::vector<double> logs(static_cast<std::size_t>(tau));
  double lf = 0.0;
  for (int x = 1; x <= tau; ++x) {
    lf += std::log(static_cast<double>(x));
    logs[x - 1] = x * log_rate - lf;
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double num = 0.0, den = 0.0;
  for (int x = 1; x <= tau; ++x) {
    const double w = std::exp(logs[x - 1] - top);
    num += x * w;
    den += w;
  }
  return num / den;
}

// Bisection on the monotone moment residual; shared by the Poisson and the
// bounded-support Poisson families, whose truncated densities coincide for
// tau <= support.
ThetaFit fit_poisson_moment(const detail::RareCounts& rare, const Bounds& bounds,
                            const FitOptions& options) {
  double weighted = 0.0;
  for (std::size_t x = 1; x < rare.n.size(); ++x) weighted += static_cast<double>(x) * rare.n[x];
  const double xbar = weighted / rare.total;
  const int tau = rare.tau;
  auto residual = [&](double rate) { return poisson_truncated_mean(rate, tau) - xbar; };
  auto score_of = [&](double rate) {
    return std::abs(rare.total * (xbar - poisson_truncated_mean(rate, tau)) / rate) / rare.total;
  };

  ThetaFit fit;
  if (residual(bounds.lo) >= 0.0) {
    fit.theta = Theta{bounds.lo};
    fit.on_boundary = true;
    return fit;
  }
  double lo = bounds.lo;
  double hi = std::clamp(std::max(1.0, 2.0 * xbar), bounds.lo, bounds.hi);
  while (residual(hi) < 0.0) {
    if (hi >= bounds.hi) {
      fit.theta = Theta{bounds.hi};
      fit.on_boundary = true;
      return fit;
    }
    lo = hi;
    hi = std::min(2.0 * hi, bounds.hi);
    ++fit.iterations;
  }
  const int cap = std::max(options.max_iter, 200);
  while (hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi) {
    if (++fit.iterations > cap)
      throw NumericalError("poisson bisection did not converge");
    const double mid = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (residual(mid) < 0.0 ? lo : hi) = mid;
  }
  const double rate = 0.5 * (lo + hi);
  fit.theta = Theta{rate};
  fit.gradient_residual = score_of(rate);
  return fit;
}

std::vector<double> rare_masses(const Family& family, const Theta& theta, int tau) {
  const auto lr = log_range(family, theta, tau, false);
  std::vector<double> out(lr.log_mass.size());
  std::transform(lr.log_mass.begin(), lr.log_mass.end(), out.begin(),
                 [](double v) { return std::exp(v); });
  return out;
}

}  // namespace

std::vector<Bounds> default_bounds(const Family& family) {
  switch (family.kind()) {
    case FamilyKind::poisson:
    case FamilyKind::truncated_poisson_support:
      return {{1e-8, 1e6}};
    case FamilyKind::negative_binomial:
      return {{1e-6, 1e6}, {1e-9, 1.0 - 1e-9}};
    case FamilyKind::poisson_mixture: {
      std::vector<Bounds> b(static_cast<std::size_t>(family.components()), Bounds{1e-8, 1e6});
      b.resize(family.param_dim(), Bounds{1e-9, 1.0});
      return b;
    }
  }
  return {};
}

void validate_tau(const Family& family, int tau) {
  if (tau < family.tau_min())
    throw InputError("tau = " + std::to_string(tau) + " is below the identifiable minimum " +
                     std::to_string(family.tau_min()) + " for " + family.name());
  if (family.kind() == FamilyKind::truncated_poisson_support && tau > family.support_max())
    throw InputError("tau exceeds the support of " + family.name());
}

ThetaFit fit_theta(const CountData& data, const Family& family,
                   const FitOptions& options) {
  validate_tau(family, options.tau);
  const auto rare = detail::rare_counts(data, options.tau);
  if (rare.total == 0.0) throw InsufficientRareData(options.tau);
  const auto bounds =
      options.theta_bounds.empty() ? default_bounds(family) : options.theta_bounds;
  if (bounds.size() != family.param_dim())
    throw InputError("theta bounds must have one interval per parameter");
  for (const auto& b : bounds)
    if (!(b.lo < b.hi)) throw InputError("theta bounds must satisfy lo < hi");

  switch (family.kind()) {
    case FamilyKind::poisson:
    case FamilyKind::truncated_poisson_support:
      return fit_poisson_moment(rare, bounds[0], options);
    case FamilyKind::negative_binomial:
      return detail::fit_negbin(rare, bounds, options);
    case FamilyKind::poisson_mixture:
      return detail::fit_mixture(data, rare, family, bounds, options);
  }
  throw InputError("unsupported family");
}

double truncated_loglik(const CountData& data, const Family& family,
                        const Theta& theta, int tau) {
  check_domain(family, theta);
  return detail::rare_loglik(detail::rare_counts(data, tau), family, theta);
}

std::vector<double> truncated_score(const CountData& data, const Family& family,
                                    const Theta& theta, int tau) {
  check_domain(family, theta);
  return detail::rare_score(detail::rare_counts(data, tau), family, theta);
}

double poisson_fixed_point_map(double rate, double rare_mean, int tau) {
  const Family pois = Family::poisson();
  const auto mass = rare_masses(pois, Theta{rate}, tau);
  double cdf_tau = 0.0;
  for (const double m : mass) cdf_tau += m;
  const double cdf_prev = cdf_tau - mass.back();
  return rare_mean * (cdf_tau - std::exp(-rate)) / cdf_prev;
}

QEstimate q_hat(const CountData& data, const Family& family, const Theta& theta,
                int tau) {
  check_domain(family, theta);
  const Frequency rare = d_tau(data, tau);
  if (rare == 0) throw InsufficientRareData(tau);
  const auto mass = rare_masses(family, theta, tau);
  double rare_mass = 0.0;
  for (std::size_t x = 1; x < mass.size(); ++x) rare_mass += mass[x];
  const double ratio = static_cast<double>(data.distinct()) / static_cast<double>(rare);
  const double raw = 1.0 / (mass[0] + ratio * rare_mass);
  return {std::min(raw, 1.0), raw > 1.0, raw};
}

double f_pseudo(const CountData& data, const Family& family, const Theta& theta,
                double q, int tau, Abundance x) {
  check_domain(family, theta);
  if (!(q < 1.0)) throw InputError("pseudo-estimator of F needs q < 1");
  if (x <= static_cast<Abundance>(tau)) throw InputError("F is supported above tau");
  const Frequency abundant = data.distinct() - d_tau(data, tau);
  if (abundant == 0) throw InputError("no species above tau");
  const auto mass = rare_masses(family, theta, tau);
  double head = 0.0;
  for (const double m : mass) head += m;
  const double nx = static_cast<double>(data.n(x));
  return (1.0 - q * head) * nx / ((1.0 - q) * static_cast<double>(abundant)) -
         q / (1.0 - q) * density(family, theta, x);
}

double n_hat(Frequency d, const Family& family, const Theta& theta, double q) {
  const double p0 = q * density(family, theta, 0);
  if (!(p0 < 1.0)) throw NumericalError("q * R(0) >= 1: N is not estimable");
  return static_cast<double>(d) / (1.0 - p0);
}

double n_classical(const CountData& data, const Family& family,
                   const Theta& theta, int tau) {
  const double r0 = density(family, theta, 0);
  if (!(r0 < 1.0)) throw NumericalError("R(0) >= 1: classical estimate undefined");
  const auto rare = static_cast<double>(d_tau(data, tau));
  return rare / (1.0 - r0) + (static_cast<double>(data.distinct()) - rare);
}

double chao(const CountData& data) {
  const auto n1 = static_cast<double>(data.n(1));
  const auto n2 = static_cast<double>(data.n(2));
  if (n2 == 0.0) throw NumericalError("chao estimator undefined: n_2 = 0");
  return static_cast<double>(data.distinct()) + n1 * n1 / (2.0 * n2);
}

double zelterman_theta(const CountData& data) {
  const auto n1 = static_cast<double>(data.n(1));
  const auto n2 = static_cast<double>(data.n(2));
  if (n1 == 0.0 || n2 == 0.0)
    throw NumericalError("zelterman estimator undefined: needs n_1, n_2 > 0");
  return 2.0 * n2 / n1;
}

FitResult fit_full(const CountData& data, const Family& family,
                   const FitOptions& options, bool with_diagnostics) {
  const ThetaFit tf = fit_theta(data, family, options);
  FitResult r;
  r.family = family;
  r.tau = options.tau;
  r.theta_hat = tf.theta;
  r.theta_on_boundary = tf.on_boundary;
  r.iterations = tf.iterations;
  r.gradient_residual = tf.gradient_residual;
  r.d = data.distinct();
  r.d_tau = d_tau(data, options.tau);
  const auto q = q_hat(data, family, tf.theta, options.tau);
  r.q_hat = q.value;
  r.q_clamped = q.clamped;
  r.q_raw = q.raw;
  r.p0_hat = q.value * density(family, tf.theta, 0);
  r.n_hat = n_hat(r.d, family, tf.theta, q.value);
  r.n_classical = n_classical(data, family, tf.theta, options.tau);
  if (tf.on_boundary) r.notes.push_back("theta estimate on the boundary of its bounds");
  if (q.clamped) r.notes.push_back("q estimate clamped to 1");
  if (with_diagnostics) {
    try {
      r.score_residual = score_residual(data, family, tf.theta, q.value, options.tau);
      const auto cov = asymptotic_covariance(family, tf.theta, q.value, options.tau, r.d);
      r.asym_cov = cov.covariance;
      r.se_n = cov.se_n;
    } catch (const NumericalError& e) {
      r.notes.push_back(std::string("diagnostics unavailable: ") + e.what());
    }
  }
  return r;
}

}  // namespace richness
