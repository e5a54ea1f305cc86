#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "richness/counts.hpp"
#include "richness/families.hpp"
#include "richness/fit.hpp"
#include "richness/selection.hpp"

namespace richness {

/// Abundance law F of the abundant species, on integers >= 1.
class Nuisance {
 public:
  // Uniform on {lo..hi}.
  static Nuisance uniform(Abundance lo, Abundance hi);
  // Arbitrary masses; must be nonnegative and sum to 1 within 1e-9.
  static Nuisance custom(std::map<Abundance, double> mass);

  const std::map<Abundance, double>& mass() const { return mass_; }
  Abundance min_support() const { return mass_.begin()->first; }
  std::string describe() const;

 private:
  std::map<Abundance, double> mass_;
  std::string description_;
};

struct SimDesign {
  std::uint64_t n_true = 1000;
  double q_true = 0.5;
  Family family = Family::poisson();
  Theta theta{1.0};
  Nuisance nuisance = Nuisance::uniform(10, 40);
  int reps = 1000;
  int m_boot = 100;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
};

void validate_design(const SimDesign& design);

/// One synthetic dataset: N Bernoulli(q) flags, abundances from R_theta or F,
/// zeros discarded. Depends only on (design.seed, replicate).
CountData generate(const SimDesign& design, std::uint64_t replicate);

/// Estimate from one replicate; absent fields mean the estimator failed.
struct ReplicateEstimate {
  std::optional<double> n_hat;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::string error;
};

struct EstimatorMetrics {
  std::string name;
  std::size_t evaluated = 0;
  std::size_t failures = 0;
  double mean = 0.0;
  double se_over_n = 0.0;   // sample SD / N
  double rmae = 0.0;        // mean |N_hat - N| / N
  double rmse_rel = 0.0;    // mean ((N_hat - N) / N)^2
  double rmse_table = 0.0;  // rmse_rel * 100
  std::optional<double> inf_rate;  // % of replicates with N below the interval
  std::optional<double> sup_rate;  // % of replicates with N above the interval
};

// Aggregates successful estimates; interval rates use replicates with an interval.
EstimatorMetrics summarize(const std::string& name,
                           const std::vector<ReplicateEstimate>& estimates,
                           double n_true);

struct ReplicateOutcome {
  std::uint64_t index = 0;
  Frequency d = 0;
  int tau_used = 0;
  ReplicateEstimate n_hat;
  ReplicateEstimate chao;
  ReplicateEstimate n_classical;
  std::optional<SelectionTrace> trace;  // kept when requested
};

struct MonteCarloOptions {
  TauPolicy policy = TauPolicy::gl();
  bool confidence_intervals = true;
  bool keep_traces = false;
  FitOptions fit;
  unsigned threads = 0;
};

struct SimReport {
  SimDesign design;
  Family fitted_family = Family::poisson();
  std::vector<EstimatorMetrics> estimators;  // n_hat_selected, chao, n_classical
  std::vector<ReplicateOutcome> replicates;
  std::size_t failures = 0;

  const EstimatorMetrics& metrics(const std::string& name) const;
};

// Percentile interval of `values` at `level`, linear interpolation.
std::pair<double, double> percentile_interval(std::vector<double> values, double level);

/// Per replicate: generate, estimate under the tau policy, bootstrap
/// percentile interval from the m_boot refits at the tau used. Throws
/// NumericalError when more than 10% of replicates fail.
SimReport run_monte_carlo(const SimDesign& design, const Family& fitted,
                          const MonteCarloOptions& options);

// Columns: estimator, q, N, theta, mean, se_over_n, rmae, rmse_rel,
// rmse_table, inf, sup, failures.
std::string report_csv(const SimReport& report);

}  // namespace richness
