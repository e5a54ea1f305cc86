#include "richness/growth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "richness/errors.hpp"
#include "richness/parallel.hpp"
#include "richness/random.hpp"
#include "text_format.hpp"

namespace richness {

double extrapolate(const FitResult& fit, double gamma) {
  const Family& family = fit.family;
  if (!family.dilatable()) throw InputError(family.name() + " does not support dilation");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be positive");
  const double d = static_cast<double>(fit.d);
  const double base = 1.0 - fit.q_hat * density(family, fit.theta_hat, 0);
  if (!(base > 0.0)) throw NumericalError("q * R(0) >= 1: extrapolation undefined");
  if (gamma == 1.0) return d;
  const Theta dilated = dilate(family, fit.theta_hat, gamma);
  return d * (1.0 - fit.q_hat * density(family, dilated, 0)) / base;
}

GrowthCurve growth_curve(const FitResult& fit, const std::vector<double>& gammas) {
  GrowthCurve curve;
  curve.base_d = fit.d;
  curve.fit = fit;
  for (const double g : gammas) curve.points.push_back({g, extrapolate(fit, g)});
  return curve;
}

namespace {

CountData histogram(const std::vector<std::string>& words, std::size_t prefix) {
  std::unordered_map<std::string_view, Abundance> counts;
  for (std::size_t i = 0; i < prefix; ++i) ++counts[words[i]];
  std::map<Abundance, Frequency> hist;
  for (const auto& [w, c] : counts) ++hist[c];
  return CountData(std::move(hist), "text prefix");
}

}  // namespace

std::vector<GrowthRow> growth_experiment(std::string_view text, const Family& family,
                                         const std::vector<double>& fractions,
                                         const GrowthOptions& options) {
  if (!family.dilatable()) throw InputError(family.name() + " does not support dilation");
  for (const double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw InputError("fractions must lie in (0, 1]");
  const auto words = tokenize_words(text);
  if (words.empty()) throw InputError("text has no word tokens");
  const Frequency true_total = histogram(words, words.size()).distinct();

  std::vector<GrowthRow> rows(fractions.size());
  parallel_for(
      fractions.size(),
      [&](std::size_t i) {
        GrowthRow& row = rows[i];
        row.fraction = fractions[i];
        row.gamma = 1.0 / fractions[i];
        row.prefix_tokens = std::min(
            words.size(),
            static_cast<std::size_t>(std::ceil(fractions[i] * static_cast<double>(words.size()))));
        const CountData data = histogram(words, row.prefix_tokens);
        row.prefix_d = data.distinct();
        row.true_total = true_total;
        FitResult fit;
        if (options.policy.mode == TauPolicy::Mode::selected) {
          SelectionOptions sel;
          sel.tau_min = options.policy.tau_min;
          sel.tau_max = options.policy.tau_max > 0
                            ? std::min(options.policy.tau_max, default_tau_max(data))
                            : default_tau_max(data);
          sel.m_boot = options.m_boot;
          sel.seed = derive_seed(options.seed, {i});
          sel.target = options.policy.target;
          sel.fit = options.fit;
          sel.threads = 1;
          fit = select_tau(data, family, sel).selected().fit;
        } else {
          FitOptions fo = options.fit;
          fo.tau = options.policy.tau;
          fit = fit_full(data, family, fo, false);
        }
        row.tau_used = fit.tau;
        row.predicted = extrapolate(fit, row.gamma);
      },
      options.threads);
  return rows;
}

std::string growth_csv(const std::vector<GrowthRow>& rows) {
  using detail::format_double;
  std::ostringstream out;
  out << "fraction,gamma,predicted,true,tau_used\n";
  for (const auto& r : rows)
    out << format_double(r.fraction) << ',' << format_double(r.gamma) << ','
        << format_double(r.predicted) << ',' << r.true_total << ',' << r.tau_used << '\n';
  return out.str();
}

}  // namespace richness
