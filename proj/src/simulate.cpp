#include "richness/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "richness/errors.hpp"
#include "richness/parallel.hpp"
#include "richness/random.hpp"
#include "text_format.hpp"

namespace richness {

Nuisance Nuisance::uniform(Abundance lo, Abundance hi) {
  if (lo < 1 || hi < lo) throw InputError("uniform nuisance needs 1 <= lo <= hi");
  Nuisance n;
  const double w = 1.0 / static_cast<double>(hi - lo + 1);
  for (Abundance x = lo; x <= hi; ++x) n.mass_[x] = w;
  n.description_ = "uniform(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
  return n;
}

Nuisance Nuisance::custom(std::map<Abundance, double> mass) {
  double total = 0.0;
  for (const auto& [x, w] : mass) {
    if (x < 1) throw InputError("nuisance support must be >= 1");
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("nuisance masses must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("nuisance masses must sum to 1");
  std::erase_if(mass, [](const auto& kv) { return kv.second == 0.0; });
  if (mass.empty()) throw InputError("nuisance has no mass");
  Nuisance n;
  n.mass_ = std::move(mass);
  n.description_ = "custom(" + std::to_string(n.mass_.size()) + " points)";
  return n;
}

std::string Nuisance::describe() const { return description_; }

void validate_design(const SimDesign& d) {
  if (d.n_true < 1) throw InputError("design needs N >= 1");
  if (!(d.q_true >= 0.0 && d.q_true <= 1.0)) throw InputError("design needs q in [0, 1]");
  check_domain(d.family, d.theta);
  if (d.reps < 2) throw InputError("design needs reps >= 2");
  if (d.m_boot < 2) throw InputError("design needs m_boot >= 2");
  if (!(d.ci_level > 0.0 && d.ci_level < 1.0)) throw InputError("ci level must lie in (0, 1)");
}

CountData generate(const SimDesign& design, std::uint64_t replicate) {
  Rng rng(derive_seed(design.seed, {replicate}));
  Sampler rare(design.family, design.theta);
  std::vector<Abundance> support;
  std::vector<double> weights;
  for (const auto& [x, w] : design.nuisance.mass()) {
    support.push_back(x);
    weights.push_back(w);
  }
  std::discrete_distribution<std::size_t> abundant(weights.begin(), weights.end());
  std::bernoulli_distribution is_rare(design.q_true);
  std::map<Abundance, Frequency> hist;
  for (std::uint64_t i = 0; i < design.n_true; ++i) {
    std::uint64_t x = is_rare(rng) ? rare(rng) : support[abundant(rng)];
    if (x == 0) continue;
    if (x > kMaxAbundance) x = kMaxAbundance;
    ++hist[static_cast<Abundance>(x)];
  }
  return CountData(std::move(hist), "simulated replicate " + std::to_string(replicate));
}

std::pair<double, double> percentile_interval(std::vector<double> values, double level) {
  if (values.empty()) throw InputError("percentile interval of an empty sample");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double alpha = 1.0 - level;
  return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

EstimatorMetrics summarize(const std::string& name,
                           const std::vector<ReplicateEstimate>& estimates,
                           double n_true) {
  EstimatorMetrics m;
  m.name = name;
  std::vector<double> v;
  std::size_t with_ci = 0, below = 0, above = 0;
  for (const auto& e : estimates) {
    if (!e.n_hat) {
      ++m.failures;
      continue;
    }
    v.push_back(*e.n_hat);
    if (e.ci_lo && e.ci_hi) {
      ++with_ci;
      if (n_true < *e.ci_lo) ++below;
      if (n_true > *e.ci_hi) ++above;
    }
  }
  m.evaluated = v.size();
  if (v.empty()) return m;
  double sum = 0.0, abs_err = 0.0, sq_err = 0.0;
  for (const double x : v) {
    sum += x;
    abs_err += std::abs(x - n_true) / n_true;
    sq_err += (x - n_true) * (x - n_true) / (n_true * n_true);
  }
  const auto k = static_cast<double>(v.size());
  m.mean = sum / k;
  if (v.size() > 1) {
    double ss = 0.0;
    for (const double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se_over_n = std::sqrt(ss / (k - 1.0)) / n_true;
  }
  m.rmae = abs_err / k;
  m.rmse_rel = sq_err / k;
  m.rmse_table = 100.0 * m.rmse_rel;
  if (with_ci > 0) {
    m.inf_rate = 100.0 * static_cast<double>(below) / static_cast<double>(with_ci);
    m.sup_rate = 100.0 * static_cast<double>(above) / static_cast<double>(with_ci);
  }
  return m;
}

const EstimatorMetrics& SimReport::metrics(const std::string& name) const {
  for (const auto& e : estimators)
    if (e.name == name) return e;
  throw InputError("no estimator named " + name);
}

namespace {

ReplicateOutcome run_replicate(const SimDesign& design, const Family& fitted,
                               const MonteCarloOptions& options, std::uint64_t r) {
  ReplicateOutcome out;
  out.index = r;
  const CountData data = generate(design, r);
  out.d = data.distinct();
  const std::uint64_t boot_seed = derive_seed(design.seed, {r, 0xb0075u});
  try {
    out.chao.n_hat = chao(data);
  } catch (const std::exception& e) {
    out.chao.error = e.what();
  }
  try {
    std::vector<double> boot_n;
    if (options.policy.mode == TauPolicy::Mode::selected) {
      SelectionOptions sel;
      sel.tau_min = options.policy.tau_min;
      sel.tau_max = options.policy.tau_max > 0
                        ? std::min(options.policy.tau_max, default_tau_max(data))
                        : default_tau_max(data);
      sel.m_boot = design.m_boot;
      sel.seed = boot_seed;
      sel.target = options.policy.target;
      sel.fit = options.fit;
      sel.threads = 1;
      SelectionTrace trace = select_tau(data, fitted, sel);
      const TauRecord& rec = trace.selected();
      out.tau_used = rec.tau;
      out.n_hat.n_hat = rec.n_hat;
      out.n_classical.n_hat = rec.fit.n_classical;
      boot_n = rec.boot.n;
      if (options.keep_traces) out.trace = std::move(trace);
    } else {
      FitOptions fo = options.fit;
      fo.tau = options.policy.tau;
      out.tau_used = fo.tau;
      const FitResult fit = fit_full(data, fitted, fo, false);
      out.n_hat.n_hat = fit.n_hat;
      out.n_classical.n_hat = fit.n_classical;
      if (options.confidence_intervals) {
        BootstrapOptions bo;
        bo.m_boot = design.m_boot;
        bo.seed = boot_seed;
        bo.target = SelectionTarget::n;
        bo.fit = fo;
        bo.threads = 1;
        boot_n = bootstrap(data, fitted, fo.tau, fit, bo).n;
      }
    }
    if (options.confidence_intervals && !boot_n.empty()) {
      const auto [lo, hi] = percentile_interval(boot_n, design.ci_level);
      out.n_hat.ci_lo = lo;
      out.n_hat.ci_hi = hi;
    }
  } catch (const std::exception& e) {
    out.n_hat = ReplicateEstimate{};
    out.n_hat.error = e.what();
    out.n_classical = ReplicateEstimate{};
    out.n_classical.error = e.what();
  }
  return out;
}

}  // namespace

SimReport run_monte_carlo(const SimDesign& design, const Family& fitted,
                          const MonteCarloOptions& options) {
  validate_design(design);
  if (options.policy.mode == TauPolicy::Mode::fixed) validate_tau(fitted, options.policy.tau);
  SimReport report;
  report.design = design;
  report.fitted_family = fitted;
  const auto reps = static_cast<std::size_t>(design.reps);
  report.replicates.resize(reps);
  parallel_for(
      reps,
      [&](std::size_t r) { report.replicates[r] = run_replicate(design, fitted, options, r); },
      options.threads);

  std::vector<ReplicateEstimate> main, ch, cl;
  for (const auto& o : report.replicates) {
    main.push_back(o.n_hat);
    ch.push_back(o.chao);
    cl.push_back(o.n_classical);
    if (!o.n_hat.n_hat) ++report.failures;
  }
  if (10 * report.failures > reps)
    throw NumericalError(std::to_string(report.failures) + " of " + std::to_string(reps) +
                         " replicates failed (more than 10%)");
  const auto n = static_cast<double>(design.n_true);
  report.estimators.push_back(summarize("n_hat_selected", main, n));
  report.estimators.push_back(summarize("chao", ch, n));
  report.estimators.push_back(summarize("n_classical", cl, n));
  return report;
}

std::string report_csv(const SimReport& report) {
  using detail::format_double;
  std::ostringstream out;
  out << "estimator,q,N,theta,mean,se_over_n,rmae,rmse_rel,rmse_table,inf,sup,failures\n";
  std::string theta;
  for (std::size_t j = 0; j < report.design.theta.size(); ++j)
    theta += (j ? ";" : "") + format_double(report.design.theta[j]);
  auto opt = [&](const std::optional<double>& v) { return v ? format_double(*v) : ""; };
  for (const auto& m : report.estimators)
    out << m.name << ',' << format_double(report.design.q_true) << ',' << report.design.n_true
        << ',' << theta << ',' << format_double(m.mean) << ',' << format_double(m.se_over_n)
        << ',' << format_double(m.rmae) << ',' << format_double(m.rmse_rel) << ','
        << format_double(m.rmse_table) << ',' << opt(m.inf_rate) << ',' << opt(m.sup_rate)
        << ',' << m.failures << '\n';
  return out.str();
}

}  // namespace richness
