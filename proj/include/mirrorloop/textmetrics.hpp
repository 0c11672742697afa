// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Surface measures of informational change between successive iteration
// outputs. Every measure operates on Unicode scalar values of the raw text:
// no trimming, case folding or whitespace normalization is applied.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mirrorloop/error.hpp"
#include "mirrorloop/utf8.hpp"

namespace mirrorloop {

// The text T_n of one reasoning state. Holds the verbatim UTF-8 content and
// its decoded scalar values.
class IterationText {
 public:
  IterationText() = default;
  explicit IterationText(std::string content)
      : content_(std::move(content)), scalars_(utf8::decode(content_)) {}
  IterationText(const char* content) : IterationText(std::string(content)) {}

  const std::string& content() const noexcept { return content_; }
  std::u32string_view scalars() const noexcept { return scalars_; }
  std::size_t char_length() const noexcept { return scalars_.size(); }
  bool empty() const noexcept { return scalars_.empty(); }

  friend bool operator==(const IterationText& a, const IterationText& b) {
    return a.content_ == b.content_;
  }

 private:
  std::string content_;
  std::u32string scalars_;
};

// Measured quantities for the transition from iteration n-1 to n.
struct MetricVector {
  double delta_i = 0.0;        // normalized edit distance, [0,1]
  double ngram_novelty = 0.0;  // [0,1]
  double embed_drift = 0.0;    // 1 - cos, [0,2]
  double char_entropy = 0.0;   // bits
  std::size_t length_chars = 0;

  friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

// Unit-cost Levenshtein distance. Strips the common prefix and suffix, then
// runs a single-row dynamic program over the shorter remainder.
template <typename CharT>
std::size_t levenshtein(std::basic_string_view<CharT> a,
                        std::basic_string_view<CharT> b) {
  while (!a.empty() && !b.empty() && a.front() == b.front()) {
    a.remove_prefix(1);
    b.remove_prefix(1);
  }
  while (!a.empty() && !b.empty() && a.back() == b.back()) {
    a.remove_suffix(1);
    b.remove_suffix(1);
  }
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();

  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::size_t levenshtein(const IterationText& a, const IterationText& b) {
  return levenshtein(a.scalars(), b.scalars());
}

// Levenshtein distance divided by the longer length; 0 when both are empty.
inline double normalized_edit_distance(const IterationText& a,
                                       const IterationText& b) {
  const std::size_t longest = std::max(a.char_length(), b.char_length());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

// Shannon entropy in bits of the empirical scalar-value distribution.
inline double char_entropy(const IterationText& t) {
  if (t.empty()) return 0.0;
  std::unordered_map<char32_t, std::size_t> counts;
  for (char32_t c : t.scalars()) ++counts[c];
  // Sum in a fixed order so the result does not depend on hash layout.
  std::vector<std::size_t> sorted;
  sorted.reserve(counts.size());
  for (const auto& [c, k] : counts) sorted.push_back(k);
  std::sort(sorted.begin(), sorted.end());
  const double total = static_cast<double>(t.char_length());
  double h = 0.0;
  for (std::size_t k : sorted) {
    const double p = static_cast<double>(k) / total;
    h -= p * std::log2(p);
  }
  return h > 0.0 ? h : 0.0;
}

using NgramSet = std::set<std::u32string>;

inline NgramSet ngram_set(const IterationText& t, std::size_t n) {
  if (n == 0) throw PreconditionError("ngram_set: n must be >= 1");
  NgramSet out;
  const auto s = t.scalars();
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    out.emplace(s.substr(i, n));
  }
  return out;
}

inline constexpr std::size_t kNoveltyGramLength = 3;

// Fraction of t's 3-grams absent from history. 1.0 against an empty history,
// 0.0 when t has no 3-grams at all.
inline double ngram_novelty(const IterationText& t, const NgramSet& history) {
  const NgramSet grams = ngram_set(t, kNoveltyGramLength);
  if (grams.empty()) return 0.0;
  if (history.empty()) return 1.0;
  std::size_t novel = 0;
  for (const auto& g : grams) {
    if (!history.contains(g)) ++novel;
  }
  return static_cast<double>(novel) / static_cast<double>(grams.size());
}

// Running union of 3-grams over a sequence's iterations.
class NgramHistory {
 public:
  const NgramSet& grams() const noexcept { return grams_; }

  void add(const IterationText& t) {
    auto g = ngram_set(t, kNoveltyGramLength);
    grams_.merge(g);
  }

 private:
  NgramSet grams_;
};

}  // namespace mirrorloop
