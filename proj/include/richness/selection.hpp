#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "richness/counts.hpp"
#include "richness/families.hpp"
#include "richness/fit.hpp"

namespace richness {

// Quantity whose risk drives the choice of tau.
enum class SelectionTarget { p0, n };

SelectionTarget parse_selection_target(const std::string& name);
std::string to_string(SelectionTarget target);

struct BootstrapOptions {
  int m_boot = 100;
  std::uint64_t seed = 0;
  SelectionTarget target = SelectionTarget::p0;
  FitOptions fit;  // tau overridden per call
  unsigned threads = 0;
};

/// Bootstrap replicates of the fitted target at one tau.
struct BootstrapSample {
  double p0_hat = 0.0;            // centers: the estimates on the original data
  double n_hat = 0.0;
  std::vector<double> p0;         // per replicate, q R(0)
  std::vector<double> n;          // per replicate, N_hat
  int redraws = 0;                // failed fits replaced by fresh resamples
  double variance(SelectionTarget target) const;
};

/// Resamples D abundances with replacement, refits at tau and collects the
/// target. Failed refits are redrawn, at most 10 draws per replicate.
/// Replicate j, draw a uses the stream derive_seed(seed, {j, a}), so draw 0
/// of replicate j is the same resample for every tau.
BootstrapSample bootstrap(const CountData& data, const Family& family, int tau,
                          const FitResult& full, const BootstrapOptions& options);

// (1/M) sum_j (target_j - target_hat)^2.
double bootstrap_variance(const CountData& data, const Family& family, int tau,
                          const BootstrapOptions& options);

// max_{i <= index} [(estimates[i] - estimates[index])^2 - variances[i]]_+
double bias_proxy(const std::vector<double>& estimates,
                  const std::vector<double>& variances, std::size_t index);

struct TauRecord {
  int tau = 0;
  double p0_hat = 0.0;
  double n_hat = 0.0;
  double var_proxy = 0.0;
  double bias_proxy = 0.0;
  double criterion = 0.0;
  FitResult fit;
  BootstrapSample boot;
};

struct SelectionOptions {
  int tau_min = 0;  // 0: family.tau_min()
  int tau_max = 0;  // 0: min(largest abundance, 40)
  int m_boot = 100;
  std::uint64_t seed = 0;
  SelectionTarget target = SelectionTarget::p0;
  FitOptions fit;
  unsigned threads = 0;
};

struct SelectionTrace {
  std::vector<TauRecord> records;  // ascending tau, failed taus omitted
  int selected_tau = 0;
  SelectionTarget target = SelectionTarget::p0;
  std::vector<std::string> warnings;

  const TauRecord& selected() const;
};

// Default upper end of the tau search range for a dataset.
int default_tau_max(const CountData& data);

/// Fits every tau in range, computes the bootstrap variance and bias proxies
/// on the target, and picks argmin(bias + var) with ties to the smaller tau.
SelectionTrace select_tau(const CountData& data, const Family& family,
                          const SelectionOptions& options);

// Columns: tau, p0_hat, n_hat, var_proxy, bias_proxy, criterion.
std::string trace_csv(const SelectionTrace& trace);

/// Fixed tau or data-driven selection.
struct TauPolicy {
  enum class Mode { fixed, selected };
  Mode mode = Mode::selected;
  int tau = 0;
  int tau_min = 0;
  int tau_max = 0;
  SelectionTarget target = SelectionTarget::p0;

  static TauPolicy fixed_at(int tau) { return {Mode::fixed, tau, 0, 0, SelectionTarget::p0}; }
  static TauPolicy gl(SelectionTarget target = SelectionTarget::p0) {
    return {Mode::selected, 0, 0, 0, target};
  }
};

}  // namespace richness
