#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace richness {

enum class FamilyKind {
  poisson,
  negative_binomial,
  poisson_mixture,
  // Poisson mass renormalized onto {0..support_max}. Test-only family whose
  // support is bounded, the setting in which pure truncation is efficient.
  truncated_poisson_support,
};

/// Parametric family R_theta for the rare-species component.
///
/// Parameter layouts:
///   poisson                    (rate)
///   negative_binomial          (r, p), mass C(x+r-1, x) p^r (1-p)^x
///   poisson_mixture(J)         (rate_1..rate_J, w_1..w_{J-1}), w_J = 1 - sum
///   truncated_poisson_support  (rate)
class Family {
 public:
  static Family poisson();
  static Family negative_binomial();
  static Family poisson_mixture(int components);
  static Family truncated_poisson_support(int support_max);

  FamilyKind kind() const { return kind_; }
  int components() const { return components_; }
  int support_max() const { return support_max_; }

  std::size_t param_dim() const;
  // Smallest tau at which theta is identifiable from the truncated density.
  int tau_min() const { return static_cast<int>(param_dim()) + 1; }
  bool dilatable() const { return kind_ != FamilyKind::truncated_poisson_support; }

  // Inverse of parse_family: "poisson", "negbin", "poisson-mixture:J",
  // "truncated-poisson-support:T".
  std::string name() const;

  bool operator==(const Family&) const = default;

 private:
  Family(FamilyKind kind, int components, int support_max)
      : kind_(kind), components_(components), support_max_(support_max) {}

  FamilyKind kind_ = FamilyKind::poisson;
  int components_ = 1;
  int support_max_ = 0;
};

Family parse_family(std::string_view text);

/// Parameter vector of a family, in the layout documented on Family.
class Theta {
 public:
  Theta() = default;
  Theta(std::initializer_list<double> values) : values_(values) {}
  explicit Theta(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const Theta&) const = default;

 private:
  std::vector<double> values_;
};

bool in_domain(const Family& family, const Theta& theta);
// Throws InputError when theta has the wrong size or leaves the domain.
void check_domain(const Family& family, const Theta& theta);

double log_density(const Family& family, const Theta& theta, std::uint64_t x);
double density(const Family& family, const Theta& theta, std::uint64_t x);

// Gradient of R_theta(x) with respect to theta (free parametrization).
std::vector<double> grad_density(const Family& family, const Theta& theta,
                                 std::uint64_t x);

// Gradient of log R_theta(x); finite wherever R_theta(x) > 0.
std::vector<double> grad_log_density(const Family& family, const Theta& theta,
                                     std::uint64_t x);

/// R_theta(0..upto) and, optionally, the gradients at the same points.
struct RangeValues {
  std::vector<double> mass;
  std::vector<std::vector<double>> grad;  // grad[x][j]
};

RangeValues evaluate_range(const Family& family, const Theta& theta, int upto,
                           bool with_grad);

/// log R_theta(0..upto) and grad log R_theta(0..upto), built incrementally
/// in O(upto) for the hot loops of the fitting code. Caller checks domain.
struct LogRange {
  std::vector<double> log_mass;
  std::vector<std::vector<double>> grad_log;  // grad_log[x][j]
};
LogRange log_range(const Family& family, const Theta& theta, int upto,
                   bool with_grad);

// S_theta^tau(1..tau): R_theta renormalized onto {1..tau}. Index 0 holds x=1.
std::vector<double> truncated_density(const Family& family, const Theta& theta,
                                      int tau);

// Parameters after a gamma-fold enlargement of the sample.
Theta dilate(const Family& family, const Theta& theta, double gamma);

// Smallest X with sum_{x > X} R_theta(x) < eps.
std::uint64_t tail_cutoff(const Family& family, const Theta& theta, double eps);

// Gamma(r, scale s) mixing measure -> negative binomial (r, p = 1/(1+s)).
Theta negbin_from_gamma(double r, double scale);
double negbin_gamma_scale(const Theta& theta);

// All J weights of a mixture parameter vector, completion included.
std::vector<double> mixture_weights(const Family& family, const Theta& theta);

using Rng = std::mt19937_64;

/// Draws i.i.d. abundances (including zeros) from R_theta.
class Sampler {
 public:
  Sampler(const Family& family, const Theta& theta);
  std::uint64_t operator()(Rng& rng);

 private:
  Family family_;
  Theta theta_;
  std::discrete_distribution<std::size_t> pick_;
  std::vector<double> cdf_;
};

std::vector<std::uint64_t> sample(const Family& family, const Theta& theta,
                                  std::uint64_t seed, std::size_t count);

}  // namespace richness
