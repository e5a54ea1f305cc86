#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fit_internal.hpp"
#include "optimize.hpp"
#include "richness/errors.hpp"

namespace richness {

namespace {

struct Components {
  std::vector<double> rates;
  std::vector<double> weights;
};

Components unpack(const Family& family, const Theta& theta) {
  const auto J = static_cast<std::size_t>(family.components());
  Components c;
  c.rates.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(J));
  c.weights = mixture_weights(family, theta);
  return c;
}

Theta pack(Components c) {
  std::vector<std::size_t> order(c.rates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return c.rates[a] < c.rates[b]; });
  std::vector<double> v;
  for (const auto j : order) v.push_back(c.rates[j]);
  for (std::size_t k = 0; k + 1 < order.size(); ++k) v.push_back(c.weights[order[k]]);
  return Theta(std::move(v));
}

}  // namespace

Theta mixture_start(const CountData& data, const Family& family, int tau) {
  const double m = truncated_mean(data, tau);
  const int J = family.components();
  Components c;
  for (int j = 0; j < J; ++j) {
    const double frac = J == 1 ? 0.5 : static_cast<double>(j) / (J - 1);
    c.rates.push_back(m / J * std::pow(static_cast<double>(J) * J, frac));
    c.weights.push_back(1.0 / J);
  }
  return pack(c);
}

MixtureEm mixture_em(const CountData& data, const Family& family, int tau,
                     const Theta& start, int max_iter, double em_tol) {
  if (family.kind() != FamilyKind::poisson_mixture)
    throw InputError("mixture EM needs a Poisson mixture family");
  validate_tau(family, tau);
  check_domain(family, start);
  const auto rare = detail::rare_counts(data, tau);
  if (rare.total == 0.0) throw InsufficientRareData(tau);

  const auto J = static_cast<std::size_t>(family.components());
  std::vector<double> log_fact(static_cast<std::size_t>(tau) + 1, 0.0);
  for (int x = 1; x <= tau; ++x) log_fact[x] = log_fact[x - 1] + std::log(static_cast<double>(x));

  MixtureEm em;
  em.theta = start;
  double ll = detail::rare_loglik(rare, family, em.theta);
  std::vector<double> logp(J);
  for (int it = 0; it < max_iter; ++it) {
    Components c = unpack(family, em.theta);
    std::vector<double> inside(J, 0.0), first(J, 0.0);
    std::vector<double> a(J, 0.0), b(J, 0.0);
    for (int x = 1; x <= tau; ++x) {
      for (std::size_t j = 0; j < J; ++j) {
        const double lp = x * std::log(c.rates[j]) - c.rates[j] - log_fact[x];
        const double p = std::exp(lp);
        inside[j] += p;
        first[j] += x * p;
        logp[j] = c.weights[j] > 0.0 ? std::log(c.weights[j]) + lp
                                     : -std::numeric_limits<double>::infinity();
      }
      const double nx = rare.n[x];
      if (nx == 0.0) continue;
      const double top = *std::max_element(logp.begin(), logp.end());
      double z = 0.0;
      for (std::size_t j = 0; j < J; ++j) z += std::exp(logp[j] - top);
      for (std::size_t j = 0; j < J; ++j) {
        const double resp = std::exp(logp[j] - top) / z;
        a[j] += nx * resp;
        b[j] += nx * resp * x;
      }
    }
    double mass = 0.0;
    for (std::size_t j = 0; j < J; ++j) mass += c.weights[j] * inside[j];
    if (!(mass > 0.0)) throw NumericalError("mixture EM: no mass on 1..tau");
    const double scale = rare.total / mass;
    Components next;
    for (std::size_t j = 0; j < J; ++j) {
      const double missing = scale * c.weights[j] * (1.0 - inside[j]);
      const double count = a[j] + missing;
      next.weights.push_back(count / scale);
      const double rate =
          count > 0.0 ? (b[j] + scale * c.weights[j] * (c.rates[j] - first[j])) / count
                      : c.rates[j];
      next.rates.push_back(std::max(rate, std::numeric_limits<double>::min()));
    }
    const double total_w = std::accumulate(next.weights.begin(), next.weights.end(), 0.0);
    for (auto& w : next.weights) w /= total_w;

    std::vector<double> v = next.rates;
    v.insert(v.end(), next.weights.begin(), next.weights.end() - 1);
    em.theta = Theta(std::move(v));
    const double ll_next = detail::rare_loglik(rare, family, em.theta);
    em.loglik.push_back(ll_next);
    em.iterations = it + 1;
    if (std::abs(ll_next - ll) <= em_tol * std::max(1.0, std::abs(ll))) {
      em.converged = true;
      break;
    }
    ll = ll_next;
  }
  em.theta = pack(unpack(family, em.theta));
  return em;
}

namespace detail {

ThetaFit fit_mixture(const CountData& data, const RareCounts& rare,
                     const Family& family, const std::vector<Bounds>& bounds,
                     const FitOptions& options) {
  const Theta start =
      options.start ? *options.start : mixture_start(data, family, rare.tau);
  const MixtureEm em =
      mixture_em(data, family, rare.tau, start, 20 * options.max_iter, options.em_tol);

  BoxProblem problem;
  const auto J = static_cast<std::size_t>(family.components());
  problem.coords.assign(J, Coord::log);
  problem.coords.resize(family.param_dim(), Coord::linear);
  problem.bounds = bounds;
  problem.objective = [&](const Theta& t) { return rare_loglik(rare, family, t); };
  problem.gradient = [&](const Theta& t) { return rare_score(rare, family, t); };
  problem.scale = rare.total;

  Theta polish_start = em.theta;
  for (std::size_t j = 0; j < polish_start.size(); ++j)
    polish_start[j] = std::clamp(polish_start[j], bounds[j].lo, bounds[j].hi);
  if (!in_domain(family, polish_start)) polish_start = em.theta;
  const BoxResult r =
      maximize_box(problem, polish_start, options.solver_tol, options.max_iter);
  if (!r.converged)
    throw NumericalError("poisson mixture fit did not converge (residual " +
                         std::to_string(r.residual) + ")");
  ThetaFit fit;
  fit.theta = pack(unpack(family, r.theta));
  fit.on_boundary = r.on_boundary;
  fit.iterations = em.iterations + r.iterations;
  fit.gradient_residual = r.residual;
  return fit;
}

}  // namespace detail

}  // namespace richness
