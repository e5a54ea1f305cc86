#include "richness/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "richness/errors.hpp"
#include "richness/parallel.hpp"
#include "richness/random.hpp"
#include "text_format.hpp"

namespace richness {

namespace {

constexpr int kDrawsPerReplicate = 10;

// D draws with replacement from the observed abundances, as a multinomial
// over the distinct abundance values.
CountData resample(const CountData& data, std::uint64_t stream) {
  Rng rng(stream);
  std::map<Abundance, Frequency> out;
  auto remaining = data.distinct();
  double remaining_mass = static_cast<double>(data.distinct());
  for (const auto& [x, nx] : data.frequencies()) {
    if (remaining == 0) break;
    const double share = static_cast<double>(nx) / remaining_mass;
    Frequency k = remaining;
    if (share < 1.0) {
      std::binomial_distribution<Frequency> draw(remaining, share);
      k = draw(rng);
    }
    if (k > 0) out.emplace(x, k);
    remaining -= k;
    remaining_mass -= static_cast<double>(nx);
  }
  return CountData(std::move(out));
}

// A Poisson-type fit pinned to its bounds has no interior maximizer; the
// resulting N_hat is an artifact of the bound.
bool degenerate(const FitResult& fit) {
  const auto kind = fit.family.kind();
  return fit.theta_on_boundary &&
         (kind == FamilyKind::poisson || kind == FamilyKind::truncated_poisson_support);
}

struct Refit {
  double p0;
  double n;
};

std::optional<Refit> refit(const CountData& rep, const Family& family, int tau,
                           const FitOptions& base, const Theta& warm) {
  FitOptions opts = base;
  opts.tau = tau;
  opts.start = warm;
  for (int pass = 0; pass < 2; ++pass) {
    try {
      const FitResult r = fit_full(rep, family, opts, false);
      if (!degenerate(r) && std::isfinite(r.p0_hat) && std::isfinite(r.n_hat))
        return Refit{r.p0_hat, r.n_hat};
      return std::nullopt;
    } catch (const InputError&) {
      return std::nullopt;
    } catch (const NumericalError&) {
      if (family.kind() == FamilyKind::poisson) return std::nullopt;
      opts.start.reset();
    }
  }
  return std::nullopt;
}

double target_of(const FitResult& fit, SelectionTarget target) {
  return target == SelectionTarget::p0 ? fit.p0_hat : fit.n_hat;
}

}  // namespace

SelectionTarget parse_selection_target(const std::string& name) {
  if (name == "p0" || name == "P0") return SelectionTarget::p0;
  if (name == "n" || name == "N") return SelectionTarget::n;
  throw InputError("unknown selection target '" + name + "' (expected p0 or n)");
}

std::string to_string(SelectionTarget target) {
  return target == SelectionTarget::p0 ? "p0" : "n";
}

double BootstrapSample::variance(SelectionTarget target) const {
  const bool at_p0 = target == SelectionTarget::p0;
  const auto& v = at_p0 ? p0 : n;
  const double center = at_p0 ? p0_hat : n_hat;
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (const double x : v) s += (x - center) * (x - center);
  return s / static_cast<double>(v.size());
}

BootstrapSample bootstrap(const CountData& data, const Family& family, int tau,
                          const FitResult& full, const BootstrapOptions& options) {
  if (options.m_boot < 2) throw InputError("bootstrap needs m_boot >= 2");
  const auto M = static_cast<std::size_t>(options.m_boot);
  BootstrapSample out;
  out.p0_hat = full.p0_hat;
  out.n_hat = full.n_hat;
  out.p0.assign(M, 0.0);
  out.n.assign(M, 0.0);
  std::vector<int> draws(M, 0);
  std::vector<char> ok(M, 0);
  parallel_for(
      M,
      [&](std::size_t j) {
        for (int a = 0; a < kDrawsPerReplicate; ++a) {
          draws[j] = a + 1;
          const CountData rep = resample(data, derive_seed(options.seed, {j, static_cast<std::uint64_t>(a)}));
          if (const auto r = refit(rep, family, tau, options.fit, full.theta_hat)) {
            out.p0[j] = r->p0;
            out.n[j] = r->n;
            ok[j] = 1;
            return;
          }
        }
      },
      options.threads);
  for (std::size_t j = 0; j < M; ++j) {
    if (!ok[j])
      throw NumericalError("bootstrap at tau = " + std::to_string(tau) +
                           ": refits keep failing (degenerate data)");
    out.redraws += draws[j] - 1;
  }
  return out;
}

double bootstrap_variance(const CountData& data, const Family& family, int tau,
                          const BootstrapOptions& options) {
  FitOptions opts = options.fit;
  opts.tau = tau;
  const FitResult full = fit_full(data, family, opts, false);
  return bootstrap(data, family, tau, full, options).variance(options.target);
}

double bias_proxy(const std::vector<double>& estimates,
                  const std::vector<double>& variances, std::size_t index) {
  if (index >= estimates.size() || estimates.size() != variances.size())
    throw InputError("bias proxy: index out of range");
  double best = 0.0;
  for (std::size_t i = 0; i <= index; ++i) {
    const double d = estimates[i] - estimates[index];
    best = std::max(best, d * d - variances[i]);
  }
  return best;
}

const TauRecord& SelectionTrace::selected() const {
  for (const auto& r : records)
    if (r.tau == selected_tau) return r;
  throw InputError("selection trace has no record for the selected tau");
}

int default_tau_max(const CountData& data) {
  return static_cast<int>(std::min<Abundance>(data.max_abundance(), 40));
}

SelectionTrace select_tau(const CountData& data, const Family& family,
                          const SelectionOptions& options) {
  if (data.empty()) throw InputError("empty dataset");
  if (options.m_boot < 2) throw InputError("selection needs m_boot >= 2");
  const int tau_min = options.tau_min > 0 ? options.tau_min : family.tau_min();
  const int tau_max = options.tau_max > 0 ? options.tau_max : default_tau_max(data);
  if (tau_min < family.tau_min())
    throw InputError("tau_min must be at least " + std::to_string(family.tau_min()) +
                     " for " + family.name());
  if (tau_max < tau_min) throw InputError("tau_max must be >= tau_min");
  if (static_cast<Abundance>(tau_max) > data.max_abundance())
    throw InputError("tau_max exceeds the largest observed abundance");

  SelectionTrace trace;
  trace.target = options.target;
  std::vector<TauRecord> candidates;
  for (int tau = tau_min; tau <= tau_max; ++tau) {
    FitOptions opts = options.fit;
    opts.tau = tau;
    try {
      TauRecord rec;
      rec.tau = tau;
      rec.fit = fit_full(data, family, opts, false);
      if (degenerate(rec.fit)) throw NumericalError("rate estimate on its bound");
      rec.p0_hat = rec.fit.p0_hat;
      rec.n_hat = rec.fit.n_hat;
      candidates.push_back(std::move(rec));
    } catch (const std::exception& e) {
      trace.warnings.push_back("tau " + std::to_string(tau) + " dropped: " + e.what());
    }
  }
  if (candidates.empty()) throw NumericalError("no tau in range could be fitted");

  const auto M = static_cast<std::size_t>(options.m_boot);
  const std::size_t T = candidates.size();
  for (auto& c : candidates) {
    c.boot.p0_hat = c.fit.p0_hat;
    c.boot.n_hat = c.fit.n_hat;
    c.boot.p0.assign(M, 0.0);
    c.boot.n.assign(M, 0.0);
  }
  // failed[t][j]: replicate j never refitted at candidate t.
  std::vector<std::vector<char>> failed(T, std::vector<char>(M, 0));
  std::vector<std::vector<int>> draws(T, std::vector<int>(M, 0));
  parallel_for(
      M,
      [&](std::size_t j) {
        const CountData first = resample(data, derive_seed(options.seed, {j, 0}));
        for (std::size_t t = 0; t < T; ++t) {
          const auto& c = candidates[t];
          std::optional<Refit> r = refit(first, family, c.tau, options.fit, c.fit.theta_hat);
          int a = 1;
          for (; !r && a < kDrawsPerReplicate; ++a) {
            const CountData rep =
                resample(data, derive_seed(options.seed, {j, static_cast<std::uint64_t>(a)}));
            r = refit(rep, family, c.tau, options.fit, c.fit.theta_hat);
          }
          draws[t][j] = a;
          if (!r) {
            failed[t][j] = 1;
            continue;
          }
          candidates[t].boot.p0[j] = r->p0;
          candidates[t].boot.n[j] = r->n;
        }
      },
      options.threads);

  for (std::size_t t = 0; t < T; ++t) {
    auto& c = candidates[t];
    if (std::find(failed[t].begin(), failed[t].end(), 1) != failed[t].end()) {
      trace.warnings.push_back("tau " + std::to_string(c.tau) +
                               " dropped: bootstrap refits keep failing");
      continue;
    }
    for (const int d : draws[t]) c.boot.redraws += d - 1;
    c.var_proxy = c.boot.variance(options.target);
    trace.records.push_back(std::move(c));
  }
  if (trace.records.empty()) throw NumericalError("no tau in range survived the bootstrap");

  std::vector<double> est, var;
  for (const auto& r : trace.records) {
    est.push_back(target_of(r.fit, options.target));
    var.push_back(r.var_proxy);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    auto& r = trace.records[i];
    r.bias_proxy = bias_proxy(est, var, i);
    r.criterion = r.bias_proxy + r.var_proxy;
    if (r.criterion < best) {
      best = r.criterion;
      trace.selected_tau = r.tau;
    }
  }
  if (!std::isfinite(best)) throw NumericalError("selection criterion is not finite");
  return trace;
}

std::string trace_csv(const SelectionTrace& trace) {
  using detail::format_double;
  std::ostringstream out;
  out << "tau,p0_hat,n_hat,var_proxy,bias_proxy,criterion\n";
  for (const auto& r : trace.records)
    out << r.tau << ',' << format_double(r.p0_hat) << ',' << format_double(r.n_hat) << ','
        << format_double(r.var_proxy) << ',' << format_double(r.bias_proxy) << ','
        << format_double(r.criterion) << '\n';
  return out.str();
}

}  // namespace richness
