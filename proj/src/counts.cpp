#include "richness/counts.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "richness/errors.hpp"

namespace richness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw InputError("line " + std::to_string(line_no) + ": " + what);
}

// Parses a strictly positive decimal integer no larger than `limit`.
std::uint64_t parse_positive(std::string_view token, std::uint64_t limit,
                             std::size_t line_no, const char* field) {
  std::uint64_t value = 0;
  if (!token.empty() && token.front() == '-')
    parse_fail(line_no, std::string(field) + " must be positive");
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec == std::errc::result_out_of_range)
    parse_fail(line_no, std::string(field) + " out of range");
  if (ec != std::errc() || ptr != end)
    parse_fail(line_no, "malformed " + std::string(field) + " '" +
                            std::string(token) + "'");
  if (value == 0) parse_fail(line_no, std::string(field) + " must be positive");
  if (value > limit) parse_fail(line_no, std::string(field) + " out of range");
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

CountData::CountData(std::map<Abundance, Frequency> frequencies,
                     std::string provenance)
    : provenance_(std::move(provenance)) {
  for (auto it = frequencies.begin(); it != frequencies.end();) {
    if (it->first == 0)
      throw InputError("abundance 0 cannot be observed in zero-truncated data");
    if (it->first > kMaxAbundance) throw InputError("abundance out of range");
    if (it->second == 0) {
      it = frequencies.erase(it);
      continue;
    }
    total_ += it->second;
    ++it;
  }
  freq_ = std::move(frequencies);
}

CountData CountData::from_abundances(std::span<const Abundance> abundances,
                                     std::string provenance) {
  std::map<Abundance, Frequency> freq;
  for (const Abundance x : abundances) {
    if (x > 0) ++freq[x];
  }
  return CountData(std::move(freq), std::move(provenance));
}

Frequency CountData::n(Abundance x) const {
  const auto it = freq_.find(x);
  return it == freq_.end() ? 0 : it->second;
}

Abundance CountData::max_abundance() const {
  return freq_.empty() ? 0 : freq_.rbegin()->first;
}

std::vector<Abundance> CountData::abundances() const {
  std::vector<Abundance> out;
  out.reserve(total_);
  for (const auto& [x, nx] : freq_) out.insert(out.end(), nx, x);
  return out;
}

CountFormat parse_count_format(const std::string& name) {
  if (name == "pairs") return CountFormat::pairs;
  if (name == "raw" || name == "raw-abundances") return CountFormat::raw_abundances;
  throw InputError("unknown count format '" + name + "' (expected pairs or raw)");
}

CountData load_counts(std::istream& in, CountFormat format,
                      std::string provenance) {
  std::map<Abundance, Frequency> freq;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_ws(line);
    if (format == CountFormat::pairs) {
      if (fields.size() != 2)
        parse_fail(line_no, "expected 'x n_x', got '" + std::string(line) + "'");
      const auto x = parse_positive(fields[0], kMaxAbundance, line_no, "abundance");
      const auto nx = parse_positive(fields[1], UINT64_MAX, line_no, "frequency");
      freq[static_cast<Abundance>(x)] += nx;
    } else {
      if (fields.size() != 1)
        parse_fail(line_no, "expected one abundance per line, got '" +
                                std::string(line) + "'");
      const auto x = parse_positive(fields[0], kMaxAbundance, line_no, "abundance");
      ++freq[static_cast<Abundance>(x)];
    }
  }
  if (freq.empty()) throw InputError("empty dataset");
  return CountData(std::move(freq), std::move(provenance));
}

CountData load_counts_file(const std::string& path, CountFormat format) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return load_counts(in, format, path);
}

Frequency d_tau(const CountData& data, int tau) {
  Frequency total = 0;
  if (tau < 1) return 0;
  for (const auto& [x, nx] : data.frequencies()) {
    if (x > static_cast<Abundance>(tau)) break;
    total += nx;
  }
  return total;
}

double truncated_mean(const CountData& data, int tau) {
  Frequency count = 0;
  double weighted = 0.0;
  for (const auto& [x, nx] : data.frequencies()) {
    if (tau < 1 || x > static_cast<Abundance>(tau)) break;
    count += nx;
    weighted += static_cast<double>(x) * static_cast<double>(nx);
  }
  if (count == 0) throw InsufficientRareData(tau);
  return weighted / static_cast<double>(count);
}

}  // namespace richness
