// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations and generators shared by the test binaries.
// The oracles are written directly from the definitions, without any of
// the library's shortcuts.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mirrorloop/protocol.hpp"

namespace mltest {

// Full (n+1) x (m+1) edit-distance matrix.
inline std::size_t naive_levenshtein(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t best = d[i - 1][j] + 1;
      if (d[i][j - 1] + 1 < best) best = d[i][j - 1] + 1;
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      if (sub < best) best = sub;
      d[i][j] = best;
    }
  }
  return d[a.size()][b.size()];
}

inline double naive_normalized(const std::u32string& a, const std::u32string& b) {
  const std::size_t m = a.size() > b.size() ? a.size() : b.size();
  if (m == 0) return 0.0;
  return static_cast<double>(naive_levenshtein(a, b)) / static_cast<double>(m);
}

inline double naive_entropy(const std::u32string& s) {
  if (s.empty()) return 0.0;
  std::map<char32_t, double> counts;
  for (char32_t c : s) counts[c] += 1.0;
  double h = 0.0;
  for (const auto& [c, k] : counts) {
    const double p = k / static_cast<double>(s.size());
    h += -p * std::log(p) / std::log(2.0);
  }
  return h;
}

inline std::set<std::u32string> naive_grams(const std::u32string& s, std::size_t n) {
  std::set<std::u32string> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) out.insert(s.substr(i, n));
  return out;
}

inline double naive_novelty(const std::u32string& t,
                            const std::vector<std::u32string>& prior) {
  std::set<std::u32string> hist;
  for (const auto& p : prior) {
    for (const auto& g : naive_grams(p, 3)) hist.insert(g);
  }
  const auto grams = naive_grams(t, 3);
  if (grams.empty()) return 0.0;
  if (hist.empty()) return 1.0;
  int novel = 0;
  for (const auto& g : grams) novel += hist.count(g) == 0 ? 1 : 0;
  return static_cast<double>(novel) / static_cast<double>(grams.size());
}

inline std::string to_utf8(const std::u32string& s) {
  std::string out;
  for (char32_t c : s) mirrorloop::utf8::append(out, c);
  return out;
}

// Small deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  std::size_t size(std::size_t max_inclusive) {
    return std::uniform_int_distribution<std::size_t>(0, max_inclusive)(eng_);
  }

  double real(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }

  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

  // Random string over the first `alphabet` symbols of a pool that mixes
  // ASCII with two- and three-byte scalars.
  std::u32string text(std::size_t max_len, std::size_t alphabet) {
    static const char32_t pool[] = {U'a', U'b', U'é', U'c', U'−',
                                    U' ', U'中', U'd', U'e', U'f'};
    const std::size_t k = alphabet < 10 ? alphabet : 10;
    std::u32string s(size(max_len), U'a');
    for (auto& c : s) c = pool[size(k - 1)];
    return s;
  }

  std::u32string mutate(const std::u32string& s, std::size_t edits, std::size_t alphabet) {
    std::u32string out = s;
    for (std::size_t e = 0; e < edits; ++e) {
      const auto other = text(1, alphabet);
      const char32_t c = other.empty() ? U'z' : other[0];
      switch (size(2)) {
        case 0:
          out.insert(out.begin() + static_cast<std::ptrdiff_t>(size(out.size())), c);
          break;
        case 1:
          if (!out.empty()) out.erase(size(out.size() - 1), 1);
          break;
        default:
          if (!out.empty()) out[size(out.size() - 1)] = c;
      }
    }
    return out;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Builds a complete sequence record whose delta_i values are given for
// iterations 1..N; other metrics are filled with the same value.
inline mirrorloop::SequenceRecord fixture_sequence(const std::string& model,
                                                   mirrorloop::Condition c,
                                                   const std::vector<double>& deltas,
                                                   const std::string& task_id = "t") {
  using namespace mirrorloop;
  SequenceRecord s;
  s.model = ProviderId::parse(model);
  s.condition = c;
  s.task.task_id = task_id;
  s.task.family = TaskFamily::kReflection;
  s.sequence_id = s.model.to_string() + "/" + task_id + "/" + to_string(c);
  s.complete = true;
  IterationRecord r0;
  r0.index = 0;
  s.iterations.push_back(r0);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    IterationRecord r;
    r.index = static_cast<int>(i + 1);
    MetricVector m;
    m.delta_i = deltas[i];
    m.ngram_novelty = deltas[i];
    m.embed_drift = deltas[i];
    m.char_entropy = 4.0;
    m.length_chars = 100;
    r.metrics = m;
    s.iterations.push_back(r);
  }
  return s;
}

}  // namespace mltest
