#include "richness/families.hpp"

#include <algorithm>
#include <array>
#include <boost/math/special_functions/digamma.hpp>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "richness/errors.hpp"

namespace richness {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this abundance, lgamma/digamma differences in r are summed directly.
constexpr std::uint64_t kDirectSumLimit = 64;

double log_factorial(std::uint64_t x) {
  static const std::array<double, 1024> table = [] {
    std::array<double, 1024> t{};
    for (std::size_t i = 1; i < t.size(); ++i)
      t[i] = t[i - 1] + std::log(static_cast<double>(i));
    return t;
  }();
  if (x < table.size()) return table[x];
  return std::lgamma(static_cast<double>(x) + 1.0);
}

double poisson_log_pmf(double rate, std::uint64_t x) {
  if (x == 0) return -rate;
  return static_cast<double>(x) * std::log(rate) - rate - log_factorial(x);
}

// log Gamma(x + r) - log Gamma(r)
double log_rising(double r, std::uint64_t x) {
  if (x <= kDirectSumLimit) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < x; ++i) s += std::log(r + static_cast<double>(i));
    return s;
  }
  return std::lgamma(static_cast<double>(x) + r) - std::lgamma(r);
}

// digamma(x + r) - digamma(r)
double digamma_diff(double r, std::uint64_t x) {
  if (x <= kDirectSumLimit) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < x; ++i) s += 1.0 / (r + static_cast<double>(i));
    return s;
  }
  return boost::math::digamma(static_cast<double>(x) + r) - boost::math::digamma(r);
}

double negbin_log_pmf(double r, double p, std::uint64_t x) {
  double v = log_rising(r, x) - log_factorial(x) + r * std::log(p);
  if (x > 0) v += static_cast<double>(x) * std::log1p(-p);
  return v;
}

double poisson_cdf(double rate, std::uint64_t upto) {
  double s = 0.0;
  for (std::uint64_t k = 0; k <= upto; ++k) s += std::exp(poisson_log_pmf(rate, k));
  return std::min(s, 1.0);
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

Family Family::poisson() { return {FamilyKind::poisson, 1, 0}; }
Family Family::negative_binomial() { return {FamilyKind::negative_binomial, 1, 0}; }

Family Family::poisson_mixture(int components) {
  if (components < 1) throw InputError("poisson mixture needs at least one component");
  return {FamilyKind::poisson_mixture, components, 0};
}

Family Family::truncated_poisson_support(int support_max) {
  if (support_max < 1) throw InputError("truncated support must be >= 1");
  return {FamilyKind::truncated_poisson_support, 1, support_max};
}

std::size_t Family::param_dim() const {
  switch (kind_) {
    case FamilyKind::poisson:
    case FamilyKind::truncated_poisson_support:
      return 1;
    case FamilyKind::negative_binomial:
      return 2;
    case FamilyKind::poisson_mixture:
      return static_cast<std::size_t>(2 * components_ - 1);
  }
  return 1;
}

std::string Family::name() const {
  switch (kind_) {
    case FamilyKind::poisson:
      return "poisson";
    case FamilyKind::negative_binomial:
      return "negbin";
    case FamilyKind::poisson_mixture:
      return "poisson-mixture:" + std::to_string(components_);
    case FamilyKind::truncated_poisson_support:
      return "truncated-poisson-support:" + std::to_string(support_max_);
  }
  return "?";
}

Family parse_family(std::string_view text) {
  if (text == "poisson") return Family::poisson();
  if (text == "negbin" || text == "negative-binomial") return Family::negative_binomial();
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto head = text.substr(0, colon);
    const auto tail = text.substr(colon + 1);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), value);
    if (ec == std::errc() && ptr == tail.data() + tail.size()) {
      if (head == "poisson-mixture" && value >= 2) return Family::poisson_mixture(value);
      if (head == "truncated-poisson-support" && value >= 1)
        return Family::truncated_poisson_support(value);
    }
  }
  throw InputError("unknown family '" + std::string(text) +
                   "' (expected poisson, negbin or poisson-mixture:J with J >= 2)");
}

bool in_domain(const Family& family, const Theta& theta) {
  if (theta.size() != family.param_dim()) return false;
  switch (family.kind()) {
    case FamilyKind::poisson:
    case FamilyKind::truncated_poisson_support:
      return positive_finite(theta[0]);
    case FamilyKind::negative_binomial:
      return positive_finite(theta[0]) && std::isfinite(theta[1]) && theta[1] > 0.0 &&
             theta[1] < 1.0;
    case FamilyKind::poisson_mixture: {
      const auto J = static_cast<std::size_t>(family.components());
      double wsum = 0.0;
      for (std::size_t j = 0; j < J; ++j)
        if (!positive_finite(theta[j])) return false;
      for (std::size_t j = J; j < theta.size(); ++j) {
        if (!positive_finite(theta[j])) return false;
        wsum += theta[j];
      }
      return wsum < 1.0;
    }
  }
  return false;
}

void check_domain(const Family& family, const Theta& theta) {
  if (theta.size() != family.param_dim())
    throw InputError(family.name() + " expects " + std::to_string(family.param_dim()) +
                     " parameters, got " + std::to_string(theta.size()));
  if (!in_domain(family, theta))
    throw InputError("parameters outside the domain of " + family.name());
}

std::vector<double> mixture_weights(const Family& family, const Theta& theta) {
  const auto J = static_cast<std::size_t>(family.components());
  std::vector<double> w(J);
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < J; ++j) {
    w[j] = theta[J + j];
    sum += w[j];
  }
  w[J - 1] = 1.0 - sum;
  return w;
}

double log_density(const Family& family, const Theta& theta, std::uint64_t x) {
  switch (family.kind()) {
    case FamilyKind::poisson:
      return poisson_log_pmf(theta[0], x);
    case FamilyKind::negative_binomial:
      return negbin_log_pmf(theta[0], theta[1], x);
    case FamilyKind::poisson_mixture:
      return std::log(density(family, theta, x));
    case FamilyKind::truncated_poisson_support:
      if (x > static_cast<std::uint64_t>(family.support_max())) return -kInf;
      return poisson_log_pmf(theta[0], x) -
             std::log(poisson_cdf(theta[0], static_cast<std::uint64_t>(family.support_max())));
  }
  return -kInf;
}

double density(const Family& family, const Theta& theta, std::uint64_t x) {
  check_domain(family, theta);
  if (family.kind() == FamilyKind::poisson_mixture) {
    const auto w = mixture_weights(family, theta);
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * std::exp(poisson_log_pmf(theta[j], x));
    return s;
  }
  return std::exp(log_density(family, theta, x));
}

std::vector<double> grad_density(const Family& family, const Theta& theta,
                                 std::uint64_t x) {
  check_domain(family, theta);
  const double xd = static_cast<double>(x);
  switch (family.kind()) {
    case FamilyKind::poisson: {
      const double rate = theta[0];
      return {(xd / rate - 1.0) * std::exp(poisson_log_pmf(rate, x))};
    }
    case FamilyKind::negative_binomial: {
      const double r = theta[0], p = theta[1];
      const double mass = std::exp(negbin_log_pmf(r, p, x));
      return {mass * (digamma_diff(r, x) + std::log(p)), mass * (r / p - xd / (1.0 - p))};
    }
    case FamilyKind::poisson_mixture: {
      const auto J = static_cast<std::size_t>(family.components());
      const auto w = mixture_weights(family, theta);
      std::vector<double> g(family.param_dim());
      std::vector<double> pj(J);
      for (std::size_t j = 0; j < J; ++j) {
        pj[j] = std::exp(poisson_log_pmf(theta[j], x));
        g[j] = w[j] * (xd / theta[j] - 1.0) * pj[j];
      }
      for (std::size_t j = 0; j + 1 < J; ++j) g[J + j] = pj[j] - pj[J - 1];
      return g;
    }
    case FamilyKind::truncated_poisson_support: {
      const auto top = static_cast<std::uint64_t>(family.support_max());
      if (x > top) return {0.0};
      const double rate = theta[0];
      const double cdf = poisson_cdf(rate, top);
      const double mass = std::exp(poisson_log_pmf(rate, x)) / cdf;
      // d/d rate of P(X <= top) is -pmf(top).
      const double top_mass = std::exp(poisson_log_pmf(rate, top));
      return {mass * ((xd / rate - 1.0) + top_mass / cdf)};
    }
  }
  return {};
}

std::vector<double> grad_log_density(const Family& family, const Theta& theta,
                                     std::uint64_t x) {
  const double xd = static_cast<double>(x);
  switch (family.kind()) {
    case FamilyKind::poisson:
      return {xd / theta[0] - 1.0};
    case FamilyKind::negative_binomial: {
      const double r = theta[0], p = theta[1];
      return {digamma_diff(r, x) + std::log(p), r / p - xd / (1.0 - p)};
    }
    case FamilyKind::truncated_poisson_support: {
      const auto top = static_cast<std::uint64_t>(family.support_max());
      const double rate = theta[0];
      return {(xd / rate - 1.0) +
              std::exp(poisson_log_pmf(rate, top)) / poisson_cdf(rate, top)};
    }
    case FamilyKind::poisson_mixture: {
      auto g = grad_density(family, theta, x);
      const double mass = density(family, theta, x);
      for (auto& v : g) v /= mass;
      return g;
    }
  }
  return {};
}

RangeValues evaluate_range(const Family& family, const Theta& theta, int upto,
                           bool with_grad) {
  check_domain(family, theta);
  RangeValues out;
  const auto n = static_cast<std::size_t>(std::max(upto, 0)) + 1;
  out.mass.resize(n);
  if (with_grad) out.grad.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    out.mass[x] = density(family, theta, x);
    if (with_grad) out.grad[x] = grad_density(family, theta, x);
  }
  return out;
}

LogRange log_range(const Family& family, const Theta& theta, int upto,
                   bool with_grad) {
  LogRange out;
  const auto n = static_cast<std::size_t>(std::max(upto, 0)) + 1;
  out.log_mass.resize(n);
  if (with_grad) out.grad_log.resize(n);
  if (family.kind() == FamilyKind::negative_binomial) {
    const double r = theta[0], p = theta[1];
    const double log_p = std::log(p), log_q = std::log1p(-p);
    double rising = 0.0, psi_diff = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (x > 0) {
        const double rx = r + static_cast<double>(x - 1);
        rising += std::log(rx);
        psi_diff += 1.0 / rx;
      }
      const double xd = static_cast<double>(x);
      out.log_mass[x] = rising - log_factorial(x) + r * log_p + (x > 0 ? xd * log_q : 0.0);
      if (with_grad) out.grad_log[x] = {psi_diff + log_p, r / p - xd / (1.0 - p)};
    }
    return out;
  }
  if (family.kind() == FamilyKind::poisson) {
    const double rate = theta[0];
    for (std::size_t x = 0; x < n; ++x) {
      out.log_mass[x] = poisson_log_pmf(rate, x);
      if (with_grad) out.grad_log[x] = {static_cast<double>(x) / rate - 1.0};
    }
    return out;
  }
  for (std::size_t x = 0; x < n; ++x) {
    out.log_mass[x] = log_density(family, theta, x);
    if (with_grad) out.grad_log[x] = grad_log_density(family, theta, x);
  }
  return out;
}

std::vector<double> truncated_density(const Family& family, const Theta& theta,
                                      int tau) {
  if (tau < 1) throw InputError("tau must be >= 1");
  check_domain(family, theta);
  // Work relative to the largest log mass so tiny rates do not underflow.
  std::vector<double> logs(static_cast<std::size_t>(tau));
  for (int x = 1; x <= tau; ++x) logs[x - 1] = log_density(family, theta, x);
  const double top = *std::max_element(logs.begin(), logs.end());
  if (!std::isfinite(top)) throw NumericalError("zero mass on {1..tau}");
  std::vector<double> out(logs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    out[i] = std::exp(logs[i] - top);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

Theta dilate(const Family& family, const Theta& theta, double gamma) {
  if (!positive_finite(gamma)) throw InputError("dilation factor must be positive");
  if (!family.dilatable())
    throw InputError(family.name() + " is not closed under dilation");
  check_domain(family, theta);
  if (gamma == 1.0) return theta;
  Theta out = theta;
  switch (family.kind()) {
    case FamilyKind::poisson:
      out[0] = gamma * theta[0];
      break;
    case FamilyKind::negative_binomial: {
      const double p = theta[1];
      out[1] = 1.0 / (1.0 + gamma * (1.0 - p) / p);
      break;
    }
    case FamilyKind::poisson_mixture:
      for (int j = 0; j < family.components(); ++j) out[j] = gamma * theta[j];
      break;
    case FamilyKind::truncated_poisson_support:
      break;
  }
  return out;
}

std::uint64_t tail_cutoff(const Family& family, const Theta& theta, double eps) {
  check_domain(family, theta);
  if (family.kind() == FamilyKind::truncated_poisson_support)
    return static_cast<std::uint64_t>(family.support_max());
  // Beyond the mode the successive-mass ratio is bounded by `ratio_cap`, so
  // the remaining tail after x is at most mass(x+1) / (1 - ratio_cap).
  constexpr std::uint64_t kLimit = 100'000'000;
  double mean = 0.0;
  double ratio_cap = 0.0;
  switch (family.kind()) {
    case FamilyKind::poisson:
      mean = theta[0];
      break;
    case FamilyKind::negative_binomial:
      mean = theta[0] * (1.0 - theta[1]) / theta[1];
      ratio_cap = 1.0 - theta[1];
      break;
    case FamilyKind::poisson_mixture:
      for (int j = 0; j < family.components(); ++j) mean = std::max(mean, theta[j]);
      break;
    default:
      break;
  }
  auto x = static_cast<std::uint64_t>(std::ceil(mean)) + 1;
  while (x < kLimit) {
    const double now = density(family, theta, x);
    const double next = density(family, theta, x + 1);
    const double ratio = now > 0.0 ? next / now : 0.0;
    const double cap = std::max(ratio, ratio_cap);
    if (cap < 1.0 && next / (1.0 - cap) < eps) return x;
    x = x < 64 ? x + 1 : x + x / 16;
  }
  throw NumericalError("tail of " + family.name() + " does not decay");
}

Theta negbin_from_gamma(double r, double scale) {
  if (!positive_finite(r) || !positive_finite(scale))
    throw InputError("gamma mixing parameters must be positive");
  return Theta{r, 1.0 / (1.0 + scale)};
}

double negbin_gamma_scale(const Theta& theta) { return (1.0 - theta[1]) / theta[1]; }

Sampler::Sampler(const Family& family, const Theta& theta)
    : family_(family), theta_(theta) {
  check_domain(family, theta);
  if (family.kind() == FamilyKind::poisson_mixture) {
    const auto w = mixture_weights(family, theta);
    pick_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  if (family.kind() == FamilyKind::truncated_poisson_support) {
    double s = 0.0;
    for (int x = 0; x <= family.support_max(); ++x) {
      s += density(family, theta, static_cast<std::uint64_t>(x));
      cdf_.push_back(s);
    }
    cdf_.back() = std::numeric_limits<double>::infinity();
  }
}

std::uint64_t Sampler::operator()(Rng& rng) {
  using Poisson = std::poisson_distribution<std::int64_t>;
  switch (family_.kind()) {
    case FamilyKind::poisson:
      return static_cast<std::uint64_t>(Poisson(theta_[0])(rng));
    case FamilyKind::negative_binomial: {
      std::gamma_distribution<double> mixing(theta_[0], negbin_gamma_scale(theta_));
      const double rate = mixing(rng);
      if (!(rate > 0.0)) return 0;
      return static_cast<std::uint64_t>(Poisson(rate)(rng));
    }
    case FamilyKind::poisson_mixture: {
      return static_cast<std::uint64_t>(Poisson(theta_[pick_(rng)])(rng));
    }
    case FamilyKind::truncated_poisson_support: {
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      return static_cast<std::uint64_t>(
          std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    }
  }
  return 0;
}

std::vector<std::uint64_t> sample(const Family& family, const Theta& theta,
                                  std::uint64_t seed, std::size_t count) {
  Sampler draw(family, theta);
  Rng rng(seed);
  std::vector<std::uint64_t> out(count);
  for (auto& v : out) v = draw(rng);
  return out;
}

}  // namespace richness
