#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "richness/counts.hpp"
#include "richness/families.hpp"
#include "richness/fit.hpp"
#include "richness/selection.hpp"

namespace richness {

/// Expected distinct count in a gamma-fold enlarged sample,
/// D (1 - q R_{theta^gamma}(0)) / (1 - q R_theta(0)). Exactly D at gamma = 1.
double extrapolate(const FitResult& fit, double gamma);

struct GrowthPoint {
  double gamma;
  double e_gamma_d;
};

struct GrowthCurve {
  std::vector<GrowthPoint> points;
  Frequency base_d = 0;
  FitResult fit;
};

GrowthCurve growth_curve(const FitResult& fit, const std::vector<double>& gammas);

/// Word tokens: maximal runs of letters joined by internal apostrophes or
/// hyphens, lowercased by Unicode simple case folding. U+2019 counts as an
/// apostrophe and is emitted as "'". Throws InputError on invalid UTF-8.
std::vector<std::string> tokenize_words(std::string_view text);

// Word-frequency histogram of tokenize_words(text).
CountData tokenize(std::string_view text);

struct GrowthRow {
  double fraction = 0.0;
  double gamma = 0.0;
  std::size_t prefix_tokens = 0;
  Frequency prefix_d = 0;
  double predicted = 0.0;
  Frequency true_total = 0;
  int tau_used = 0;
};

struct GrowthOptions {
  TauPolicy policy = TauPolicy::gl();
  int m_boot = 100;
  std::uint64_t seed = 0;
  FitOptions fit;
  unsigned threads = 0;
};

/// For each fraction rho: fit the first ceil(rho * tokens) tokens and
/// extrapolate with gamma = 1 / rho; pairs each prediction with the distinct
/// count of the full text.
std::vector<GrowthRow> growth_experiment(std::string_view text, const Family& family,
                                         const std::vector<double>& fractions,
                                         const GrowthOptions& options);

// Columns: fraction, gamma, predicted, true, tau_used.
std::string growth_csv(const std::vector<GrowthRow>& rows);

}  // namespace richness
