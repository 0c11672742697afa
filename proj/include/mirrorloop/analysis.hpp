// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Aggregation of sequence records into summary rows, trajectory curves and
// correctness strata, plus their file formats.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "mirrorloop/protocol.hpp"
#include "mirrorloop/rng.hpp"

namespace mirrorloop {

inline constexpr std::string_view kPooled = "pooled";

// Iteration windows of the summary statistics (1-based refinement indices).
struct AnalysisWindows {
  int early_first = 1;
  int early_last = 2;
  int late_first = 6;
  int late_last = 7;
  int rebound_base = 2;
  int rebound_at = 4;

  void validate() const {
    if (early_first < 1 || early_last < early_first || late_first < 1 ||
        late_last < late_first || rebound_base < 1 || rebound_at < 1) {
      throw ConfigError("analysis windows must be nonempty 1-based ranges");
    }
  }

  int max_iteration() const {
    return std::max({early_last, late_last, rebound_base, rebound_at});
  }
};

struct SummaryRow {
  std::string model;  // provider id or "pooled"
  std::size_t sequences = 0;
  double early_delta = 0.0;
  double late_delta = 0.0;
  double reduction_pct = 0.0;
  std::optional<double> grounding_rebound_pct;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

enum class GroupBy { kModel, kPooled };

inline double reduction_pct(double early, double late) {
  if (early == 0.0) throw PreconditionError("reduction of a zero early mean");
  return (early - late) / early * 100.0;
}

inline double rebound_pct(double base, double at) {
  if (base == 0.0) throw PreconditionError("rebound against a zero base");
  return (at - base) / base * 100.0;
}

using Warnings = std::vector<std::string>;

namespace detail {

inline double delta_at(const SequenceRecord& s, int iteration) {
  return s.iterations.at(static_cast<std::size_t>(iteration)).metrics->delta_i;
}

inline double window_mean(const SequenceRecord& s, int first, int last) {
  double sum = 0.0;
  for (int i = first; i <= last; ++i) sum += delta_at(s, i);
  return sum / static_cast<double>(last - first + 1);
}

inline bool usable(const SequenceRecord& s, const AnalysisWindows& w) {
  if (!s.complete) return false;
  if (s.iterations.size() <= static_cast<std::size_t>(w.max_iteration())) return false;
  for (std::size_t i = 1; i < s.iterations.size(); ++i) {
    if (!s.iterations[i].metrics) return false;
  }
  return true;
}

inline void warn(Warnings* w, std::string msg) {
  if (w != nullptr) w->push_back(std::move(msg));
}

// Complete sequences of one condition, optionally one model.
inline std::vector<const SequenceRecord*> select(
    const std::vector<SequenceRecord>& seqs, Condition c,
    const std::optional<std::string>& model, const AnalysisWindows& w,
    Warnings* warnings) {
  std::vector<const SequenceRecord*> out;
  for (const auto& s : seqs) {
    if (s.condition != c) continue;
    if (model && s.model.to_string() != *model) continue;
    if (!usable(s, w)) {
      warn(warnings, "excluded incomplete sequence " + s.sequence_id);
      continue;
    }
    out.push_back(&s);
  }
  return out;
}

inline std::optional<double> rebound_over(const std::vector<const SequenceRecord*>& g,
                                          const AnalysisWindows& w) {
  if (g.empty()) return std::nullopt;
  double base = 0.0, at = 0.0;
  for (const auto* s : g) {
    base += delta_at(*s, w.rebound_base);
    at += delta_at(*s, w.rebound_at);
  }
  const double n = static_cast<double>(g.size());
  if (base == 0.0) return std::nullopt;
  return rebound_pct(base / n, at / n);
}

}  // namespace detail

// Pooled grounded-condition rebound: mean delta at rebound_at relative to
// rebound_base, each sequence weighted equally.
inline std::optional<double> grounding_rebound(const std::vector<SequenceRecord>& seqs,
                                               const AnalysisWindows& w = {},
                                               Warnings* warnings = nullptr) {
  w.validate();
  const auto g = detail::select(seqs, Condition::kGrounded, std::nullopt, w, warnings);
  if (g.empty()) {
    detail::warn(warnings, "no grounded sequences; rebound not computed");
    return std::nullopt;
  }
  auto r = detail::rebound_over(g, w);
  if (!r) detail::warn(warnings, "zero mean delta at the rebound base iteration");
  return r;
}

// Early/late decay statistics over the ungrounded sequences. Per-model rows
// follow first appearance order; the pooled row weights sequences equally.
inline std::vector<SummaryRow> early_late_summary(const std::vector<SequenceRecord>& seqs,
                                                  GroupBy group_by,
                                                  const AnalysisWindows& w = {},
                                                  Warnings* warnings = nullptr) {
  w.validate();
  std::vector<std::optional<std::string>> groups;
  if (group_by == GroupBy::kPooled) {
    groups.push_back(std::nullopt);
  } else {
    for (const auto& s : seqs) {
      const std::string id = s.model.to_string();
      if (std::find(groups.begin(), groups.end(), std::optional<std::string>(id)) ==
          groups.end()) {
        groups.push_back(id);
      }
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& model : groups) {
    const std::string label = model ? *model : std::string(kPooled);
    const auto u = detail::select(seqs, Condition::kUngrounded, model, w, warnings);
    if (u.empty()) {
      detail::warn(warnings, "no ungrounded sequences for " + label + "; row omitted");
      continue;
    }
    SummaryRow row;
    row.model = label;
    row.sequences = u.size();
    for (const auto* s : u) {
      row.early_delta += detail::window_mean(*s, w.early_first, w.early_last);
      row.late_delta += detail::window_mean(*s, w.late_first, w.late_last);
    }
    row.early_delta /= static_cast<double>(u.size());
    row.late_delta /= static_cast<double>(u.size());
    if (row.early_delta == 0.0) {
      detail::warn(warnings, "zero early mean for " + label + "; row omitted");
      continue;
    }
    row.reduction_pct = reduction_pct(row.early_delta, row.late_delta);
    const auto g = detail::select(seqs, Condition::kGrounded, model, w, nullptr);
    row.grounding_rebound_pct = detail::rebound_over(g, w);
    rows.push_back(row);
  }
  return rows;
}

// Sequences without any compliance flag.
inline std::vector<SequenceRecord> exclude_flagged(const std::vector<SequenceRecord>& seqs) {
  std::vector<SequenceRecord> out;
  for (const auto& s : seqs) {
    if (!s.has_compliance_flags()) out.push_back(s);
  }
  return out;
}

enum class Metric { kDeltaI, kNgramNovelty, kEmbedDrift, kCharEntropy, kLengthChars };

inline constexpr Metric kAllMetrics[] = {Metric::kDeltaI, Metric::kNgramNovelty,
                                         Metric::kEmbedDrift, Metric::kCharEntropy,
                                         Metric::kLengthChars};

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::kDeltaI: return "delta_i";
    case Metric::kNgramNovelty: return "ngram_novelty";
    case Metric::kEmbedDrift: return "embed_drift";
    case Metric::kCharEntropy: return "char_entropy";
    case Metric::kLengthChars: return "length_chars";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == s) return m;
  }
  throw ParseError(0, "unknown metric '" + std::string(s) + "'");
}

inline double metric_value(const MetricVector& v, Metric m) {
  switch (m) {
    case Metric::kDeltaI: return v.delta_i;
    case Metric::kNgramNovelty: return v.ngram_novelty;
    case Metric::kEmbedDrift: return v.embed_drift;
    case Metric::kCharEntropy: return v.char_entropy;
    case Metric::kLengthChars: return static_cast<double>(v.length_chars);
  }
  return 0.0;
}

struct CurvePoint {
  int iteration = 0;
  Metric metric = Metric::kDeltaI;
  Condition condition = Condition::kUngrounded;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct BootstrapSpec {
  std::size_t resamples = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0x626f6f7473747270ULL;

  void validate() const {
    if (resamples == 0) throw ConfigError("bootstrap needs at least one resample");
    if (!(confidence > 0.0 && confidence < 1.0)) {
      throw ConfigError("bootstrap confidence must lie in (0, 1)");
    }
  }
};

// Linear interpolation between closest ranks on sorted data.
inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) throw PreconditionError("quantile of empty set");
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Percentile bootstrap over sequences. The interval is widened to contain
// the sample mean when the resampled distribution is skewed past it.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& sample,
                                              const BootstrapSpec& spec,
                                              std::uint64_t stream_seed) {
  spec.validate();
  const double m = mean_of(sample);
  if (sample.size() == 1) return {m, m};
  Rng rng(stream_seed);
  std::vector<double> means(spec.resamples);
  for (std::size_t r = 0; r < spec.resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      s += sample[rng.below(sample.size())];
    }
    means[r] = s / static_cast<double>(sample.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - spec.confidence;
  double lo = quantile_sorted(means, alpha / 2.0);
  double hi = quantile_sorted(means, 1.0 - alpha / 2.0);
  return {std::min(lo, m), std::max(hi, m)};
}

// Mean and confidence band per (condition, iteration) for one metric.
// Conditions appear ungrounded first; incomplete sequences contribute the
// iterations they reached.
inline std::vector<CurvePoint> trajectory_curves(const std::vector<SequenceRecord>& seqs,
                                                 Metric metric,
                                                 const BootstrapSpec& spec = {}) {
  spec.validate();
  std::vector<CurvePoint> out;
  for (Condition c : {Condition::kUngrounded, Condition::kGrounded}) {
    std::map<int, std::vector<double>> by_iter;
    for (const auto& s : seqs) {
      if (s.condition != c) continue;
      for (const auto& it : s.iterations) {
        if (it.metrics) by_iter[it.index].push_back(metric_value(*it.metrics, metric));
      }
    }
    for (const auto& [iter, values] : by_iter) {
      CurvePoint p;
      p.iteration = iter;
      p.metric = metric;
      p.condition = c;
      p.n = values.size();
      p.mean = mean_of(values);
      const auto ci = bootstrap_ci(
          values, spec, derive_seed(spec.seed, to_string(metric) + "/" + to_string(c),
                                    {iter}));
      p.ci_low = ci.first;
      p.ci_high = ci.second;
      out.push_back(p);
    }
  }
  return out;
}

inline std::vector<CurvePoint> all_trajectory_curves(const std::vector<SequenceRecord>& seqs,
                                                     const BootstrapSpec& spec = {}) {
  std::vector<CurvePoint> out;
  for (Metric m : kAllMetrics) {
    auto c = trajectory_curves(seqs, m, spec);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

struct StratumRow {
  TaskFamily family = TaskFamily::kArithmetic;
  Condition condition = Condition::kUngrounded;
  bool initially_correct = false;
  std::size_t sequences = 0;
  // accuracy[i] is the fraction correct at index i (index 0 included).
  std::vector<double> accuracy;
};

// Accuracy per iteration for verifiable families, split by whether the
// index-0 answer was correct. Only complete sequences are used.
inline std::vector<StratumRow> correctness_stratification(
    const std::vector<SequenceRecord>& seqs) {
  std::map<std::tuple<int, int, int>, std::vector<const SequenceRecord*>> groups;
  for (const auto& s : seqs) {
    if (!s.complete || s.iterations.empty()) continue;
    if (s.task.family != TaskFamily::kArithmetic && s.task.family != TaskFamily::kCode) {
      continue;
    }
    const bool init = s.iterations[0].correctness == Correctness::kCorrect;
    groups[{static_cast<int>(s.task.family), static_cast<int>(s.condition),
            init ? 1 : 0}]
        .push_back(&s);
  }
  std::vector<StratumRow> out;
  for (const auto& [key, g] : groups) {
    StratumRow row;
    row.family = static_cast<TaskFamily>(std::get<0>(key));
    row.condition = static_cast<Condition>(std::get<1>(key));
    row.initially_correct = std::get<2>(key) == 1;
    row.sequences = g.size();
    std::size_t len = g.front()->iterations.size();
    for (const auto* s : g) len = std::min(len, s->iterations.size());
    row.accuracy.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      std::size_t ok = 0;
      for (const auto* s : g) {
        if (s->iterations[i].correctness == Correctness::kCorrect) ++ok;
      }
      row.accuracy[i] = static_cast<double>(ok) / static_cast<double>(g.size());
    }
    out.push_back(std::move(row));
  }
  return out;
}

// ---- file formats --------------------------------------------------------

// Six significant digits, locale independent.
inline std::string fmt6(double v) {
  if (v == 0.0) v = 0.0;  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline constexpr std::string_view kSummaryCsvHeader =
    "model,sequences,early_delta,late_delta,reduction_pct,grounding_rebound_pct";
inline constexpr std::string_view kCurveCsvHeader =
    "iteration,metric,condition,mean,ci_low,ci_high,n";
inline constexpr std::string_view kStrataCsvHeader =
    "family,condition,initially_correct,sequences,iteration,accuracy";

enum class ExportFormat { kCsv, kJsonl };

inline ExportFormat parse_export_format(std::string_view s) {
  if (s == "csv") return ExportFormat::kCsv;
  if (s == "jsonl") return ExportFormat::kJsonl;
  throw ConfigError("unknown export format '" + std::string(s) + "'");
}

inline void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows,
                          ExportFormat f = ExportFormat::kCsv) {
  if (f == ExportFormat::kCsv) out << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) {
    if (f == ExportFormat::kCsv) {
      out << r.model << ',' << r.sequences << ',' << fmt6(r.early_delta) << ','
          << fmt6(r.late_delta) << ',' << fmt6(r.reduction_pct) << ','
          << (r.grounding_rebound_pct ? fmt6(*r.grounding_rebound_pct) : "") << '\n';
    } else {
      // Numbers are emitted pre-formatted so both formats carry equal values.
      out << "{\"model\":" << nlohmann::json(r.model).dump()
          << ",\"sequences\":" << r.sequences
          << ",\"early_delta\":" << fmt6(r.early_delta)
          << ",\"late_delta\":" << fmt6(r.late_delta)
          << ",\"reduction_pct\":" << fmt6(r.reduction_pct)
          << ",\"grounding_rebound_pct\":"
          << (r.grounding_rebound_pct ? fmt6(*r.grounding_rebound_pct) : "null")
          << "}\n";
    }
  }
}

inline void write_curves(std::ostream& out, const std::vector<CurvePoint>& pts,
                         ExportFormat f = ExportFormat::kCsv) {
  if (f == ExportFormat::kCsv) out << kCurveCsvHeader << '\n';
  for (const auto& p : pts) {
    if (f == ExportFormat::kCsv) {
      out << p.iteration << ',' << to_string(p.metric) << ',' << to_string(p.condition)
          << ',' << fmt6(p.mean) << ',' << fmt6(p.ci_low) << ',' << fmt6(p.ci_high)
          << ',' << p.n << '\n';
    } else {
      out << "{\"iteration\":" << p.iteration << ",\"metric\":\"" << to_string(p.metric)
          << "\",\"condition\":\"" << to_string(p.condition)
          << "\",\"mean\":" << fmt6(p.mean) << ",\"ci_low\":" << fmt6(p.ci_low)
          << ",\"ci_high\":" << fmt6(p.ci_high) << ",\"n\":" << p.n << "}\n";
    }
  }
}

inline void write_strata(std::ostream& out, const std::vector<StratumRow>& rows) {
  out << kStrataCsvHeader << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.accuracy.size(); ++i) {
      out << to_string(r.family) << ',' << to_string(r.condition) << ','
          << (r.initially_correct ? 1 : 0) << ',' << r.sequences << ',' << i << ','
          << fmt6(r.accuracy[i]) << '\n';
    }
  }
}

template <typename Writer>
void export_to_file(const std::string& path, Writer&& write) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write(out);
  out.flush();
  if (!out) throw Error("write failed for " + path);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "not a number: '" + s + "'");
  }
}

inline std::size_t parse_count(const std::string& s, std::size_t line) {
  const double v = parse_double(s, line);
  if (v < 0 || v != std::floor(v)) throw ParseError(line, "not a count: '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline std::vector<CurvePoint> read_curves_csv(std::istream& in) {
  std::string line;
  std::size_t n = 1;
  if (!std::getline(in, line) || line != kCurveCsvHeader) {
    throw ParseError(1, "curve table header mismatch");
  }
  std::vector<CurvePoint> out;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) throw ParseError(n, "expected 7 fields");
    CurvePoint p;
    p.iteration = static_cast<int>(detail::parse_count(f[0], n));
    try {
      p.metric = parse_metric(f[1]);
      p.condition = parse_condition(f[2]);
    } catch (const std::exception& e) {
      throw ParseError(n, e.what());
    }
    p.mean = detail::parse_double(f[3], n);
    p.ci_low = detail::parse_double(f[4], n);
    p.ci_high = detail::parse_double(f[5], n);
    p.n = detail::parse_count(f[6], n);
    out.push_back(p);
  }
  return out;
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::string line;
  std::size_t n = 1;
  if (!std::getline(in, line) || line != kSummaryCsvHeader) {
    throw ParseError(1, "summary table header mismatch");
  }
  std::vector<SummaryRow> out;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw ParseError(n, "expected 6 fields");
    SummaryRow r;
    r.model = f[0];
    r.sequences = detail::parse_count(f[1], n);
    r.early_delta = detail::parse_double(f[2], n);
    r.late_delta = detail::parse_double(f[3], n);
    r.reduction_pct = detail::parse_double(f[4], n);
    if (!f[5].empty()) r.grounding_rebound_pct = detail::parse_double(f[5], n);
    out.push_back(r);
  }
  return out;
}

inline std::string provider_label(const std::string& model) {
  if (model == kPooled) return "-";
  const auto colon = model.find(':');
  const std::string vendor = model.substr(0, colon);
  if (vendor == "openai") return "OpenAI";
  if (vendor == "anthropic") return "Anthropic";
  if (vendor == "google") return "Google";
  if (vendor == "scripted") return "Scripted";
  return vendor;
}

inline std::string percent_signed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", v);
  return buf;
}

// Per-model decay table: model, provider, early and late mean delta,
// reduction and grounding effect.
inline void print_table(std::ostream& out, const std::vector<SummaryRow>& rows,
                        const AnalysisWindows& w = {}) {
  const std::string early = "Early dI (" + std::to_string(w.early_first) + "-" +
                            std::to_string(w.early_last) + ")";
  const std::string late = "Late dI (" + std::to_string(w.late_first) + "-" +
                           std::to_string(w.late_last) + ")";
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-28s %-10s %15s %15s %10s %16s\n", "Model",
                "Provider", early.c_str(), late.c_str(), "Reduction",
                "Grounding Effect");
  out << buf;
  for (const auto& r : rows) {
    char e[32], l[32];
    std::snprintf(e, sizeof e, "%.3f", r.early_delta);
    std::snprintf(l, sizeof l, "%.3f", r.late_delta);
    const std::string model = r.model == kPooled ? "Pooled" : r.model;
    std::snprintf(buf, sizeof buf, "%-28s %-10s %15s %15s %10s %16s\n", model.c_str(),
                  provider_label(r.model).c_str(), e, l,
                  percent_signed(-r.reduction_pct).c_str(),
                  r.grounding_rebound_pct
                      ? percent_signed(*r.grounding_rebound_pct).c_str()
                      : "n/a");
    out << buf;
  }
}

}  // namespace mirrorloop
