#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <map>
#include <string>
#include <unordered_map>

#include "richness/errors.hpp"
#include "richness/growth.hpp"

namespace richness {

namespace {

constexpr UChar32 kRightQuote = 0x2019;

bool is_joiner(UChar32 c) { return c == '\'' || c == kRightQuote || c == '-'; }

void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  U8_APPEND_UNSAFE(reinterpret_cast<uint8_t*>(buf), len, c);
  out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  std::vector<UChar32> cps;
  cps.reserve(text.size());
  for (int32_t i = 0; i < length;) {
    const int32_t at = i;
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c < 0) throw InputError("invalid UTF-8 at byte " + std::to_string(at));
    cps.push_back(c);
  }

  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const UChar32 c = cps[i];
    if (u_isalpha(c)) {
      append_utf8(current, u_foldCase(c, U_FOLD_CASE_DEFAULT));
    } else if (is_joiner(c) && !current.empty() && i + 1 < cps.size() &&
               u_isalpha(cps[i + 1])) {
      current.push_back(c == '-' ? '-' : '\'');
    } else {
      flush();
    }
  }
  flush();
  return words;
}

CountData tokenize(std::string_view text) {
  std::unordered_map<std::string, Abundance> counts;
  for (auto& w : tokenize_words(text)) ++counts[std::move(w)];
  std::map<Abundance, Frequency> hist;
  for (const auto& [w, c] : counts) ++hist[c];
  return CountData(std::move(hist), "text");
}

}  // namespace richness
