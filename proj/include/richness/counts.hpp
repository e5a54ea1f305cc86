#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace richness {

using Abundance = std::uint32_t;
using Frequency = std::uint64_t;

// Largest abundance accepted on input.
inline constexpr Abundance kMaxAbundance = 2147483647u;

/// Frequency-of-frequencies histogram {x -> n_x} of zero-truncated abundance
/// data. Only x >= 1 with n_x >= 1 are stored; absent keys mean n_x = 0.
/// Immutable once constructed.
class CountData {
 public:
  CountData() = default;
  explicit CountData(std::map<Abundance, Frequency> frequencies,
                     std::string provenance = {});

  static CountData from_abundances(std::span<const Abundance> abundances,
                                   std::string provenance = {});

  const std::map<Abundance, Frequency>& frequencies() const { return freq_; }
  Frequency n(Abundance x) const;
  // Number of distinct observed species D.
  Frequency distinct() const { return total_; }
  Abundance max_abundance() const;
  bool empty() const { return freq_.empty(); }
  const std::string& provenance() const { return provenance_; }

  // One entry per observed species, ascending.
  std::vector<Abundance> abundances() const;

  bool operator==(const CountData& other) const { return freq_ == other.freq_; }

 private:
  std::map<Abundance, Frequency> freq_;
  Frequency total_ = 0;
  std::string provenance_;
};

enum class CountFormat { pairs, raw_abundances };

CountFormat parse_count_format(const std::string& name);

/// Parses "x n_x" lines (pairs) or one abundance per line (raw). Blank lines
/// and lines starting with '#' are skipped. Duplicate x in pairs are summed.
CountData load_counts(std::istream& in, CountFormat format,
                      std::string provenance = {});
CountData load_counts_file(const std::string& path, CountFormat format);

// D_tau: number of species with abundance <= tau.
Frequency d_tau(const CountData& data, int tau);

// Mean abundance over species with abundance <= tau.
double truncated_mean(const CountData& data, int tau);

}  // namespace richness
