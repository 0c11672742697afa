// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Online mirror-loop detection and offline plateau analysis.
//
// Windows are aligned to end at the current iteration: the window for
// iteration n covers iterations n-k+1 .. n.

#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "mirrorloop/error.hpp"
#include "mirrorloop/textmetrics.hpp"

namespace mirrorloop {

struct DetectorConfig {
  std::size_t window = 3;
  double drift_threshold = 0.05;    // tau
  double novelty_threshold = 0.05;  // nu

  void validate() const {
    if (window < 2) throw ConfigError("detector window must be >= 2");
    if (!(drift_threshold > 0.0 && drift_threshold < 1.0) ||
        !(novelty_threshold > 0.0 && novelty_threshold < 1.0)) {
      throw ConfigError("detector thresholds must lie in (0, 1)");
    }
  }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct DetectorVerdict {
  bool looping = false;
  std::optional<int> first_flag_iteration;
  double window_drift_mean = 0.0;
  double window_novelty_mean = 0.0;
};

// Per-sequence detector state. Each observation costs O(window), independent
// of sequence length. Window sums run oldest to newest, the same order as
// detect_loop_batch, so online and batch verdicts agree bit for bit.
class MirrorLoopDetector {
 public:
  explicit MirrorLoopDetector(DetectorConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
  }

  const DetectorConfig& config() const noexcept { return cfg_; }
  std::optional<int> flagged_at() const noexcept { return flagged_at_; }
  std::size_t window_size() const noexcept { return drift_.size(); }

  DetectorVerdict observe(const MetricVector& metrics, int iteration) {
    return observe(metrics.embed_drift, metrics.ngram_novelty, iteration);
  }

  DetectorVerdict observe(double embed_drift, double ngram_novelty,
                          int iteration) {
    if (iteration < 1) throw SequencingError("detector iterations start at 1");
    if (last_iteration_ && iteration <= *last_iteration_) {
      throw SequencingError("detector observation for iteration " +
                            std::to_string(iteration) + " after iteration " +
                            std::to_string(*last_iteration_));
    }
    last_iteration_ = iteration;
    push(drift_, embed_drift);
    push(novelty_, ngram_novelty);

    DetectorVerdict v;
    const double k = static_cast<double>(drift_.size());
    v.window_drift_mean = sum(drift_) / k;
    v.window_novelty_mean = sum(novelty_) / k;
    const bool full = drift_.size() == cfg_.window;
    if (full && v.window_drift_mean < cfg_.drift_threshold &&
        v.window_novelty_mean < cfg_.novelty_threshold && !flagged_at_) {
      flagged_at_ = iteration;
    }
    v.looping = flagged_at_.has_value();
    v.first_flag_iteration = flagged_at_;
    return v;
  }

 private:
  void push(std::deque<double>& w, double x) {
    w.push_back(x);
    if (w.size() > cfg_.window) w.pop_front();
  }

  static double sum(const std::deque<double>& w) {
    double s = 0.0;
    for (double x : w) s += x;
    return s;
  }

  DetectorConfig cfg_;
  std::deque<double> drift_;
  std::deque<double> novelty_;
  std::optional<int> last_iteration_;
  std::optional<int> flagged_at_;
};

// Batch evaluation over complete streams (index 0 holds iteration 1).
// Returns the first iteration whose trailing window means are both below
// threshold.
inline std::optional<int> detect_loop_batch(const std::vector<double>& drift,
                                            const std::vector<double>& novelty,
                                            const DetectorConfig& cfg) {
  cfg.validate();
  if (drift.size() != novelty.size()) {
    throw PreconditionError("drift and novelty streams differ in length");
  }
  const std::size_t k = cfg.window;
  for (std::size_t end = k; end <= drift.size(); ++end) {
    double ds = 0.0, ns = 0.0;
    for (std::size_t i = end - k; i < end; ++i) {
      ds += drift[i];
      ns += novelty[i];
    }
    if (ds / static_cast<double>(k) < cfg.drift_threshold &&
        ns / static_cast<double>(k) < cfg.novelty_threshold) {
      return static_cast<int>(end);
    }
  }
  return std::nullopt;
}

inline constexpr std::size_t kPlateauWindow = 3;

// Last iteration of the first window whose mean delta_i is below tau.
// delta_series[0] is iteration 1.
inline std::optional<int> plateau_iteration(const std::vector<double>& delta_series,
                                            double tau,
                                            std::size_t window = kPlateauWindow) {
  if (window == 0) throw PreconditionError("plateau window must be >= 1");
  if (delta_series.size() < window) return std::nullopt;
  for (std::size_t end = window; end <= delta_series.size(); ++end) {
    double sum = 0.0;
    for (std::size_t j = end - window; j < end; ++j) sum += delta_series[j];
    if (sum / static_cast<double>(window) < tau) return static_cast<int>(end);
  }
  return std::nullopt;
}

// Median with the midpoint-of-middle-two convention.
inline double median_of_sorted(const std::vector<double>& v) {
  if (v.empty()) throw PreconditionError("median of empty set");
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

// Q1 and Q3 are the medians of the lower and upper halves, excluding the
// overall median when the count is odd. A single value gives q1 = q3 = it.
inline Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw PreconditionError("quartiles of empty set");
  std::sort(v.begin(), v.end());
  Quartiles q;
  q.median = median_of_sorted(v);
  const std::size_t n = v.size();
  if (n == 1) {
    q.q1 = q.q3 = v[0];
    return q;
  }
  const std::size_t half = n / 2;
  std::vector<double> lower(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<double> upper(v.end() - static_cast<std::ptrdiff_t>(half), v.end());
  q.q1 = median_of_sorted(lower);
  q.q3 = median_of_sorted(upper);
  return q;
}

struct SensitivityRow {
  double tau = 0.0;
  std::size_t sequences = 0;
  std::size_t plateau_count = 0;
  std::optional<double> median_iteration;
  std::optional<double> iqr_low;
  std::optional<double> iqr_high;
};

// Applies plateau_iteration to every series at each threshold.
inline std::vector<SensitivityRow> sensitivity_sweep(
    const std::vector<std::vector<double>>& delta_series,
    const std::vector<double>& taus, std::size_t window = kPlateauWindow) {
  if (delta_series.empty()) {
    throw PreconditionError("sensitivity_sweep needs at least one sequence");
  }
  std::vector<SensitivityRow> rows;
  rows.reserve(taus.size());
  for (double tau : taus) {
    SensitivityRow row;
    row.tau = tau;
    row.sequences = delta_series.size();
    std::vector<double> hits;
    for (const auto& s : delta_series) {
      if (auto p = plateau_iteration(s, tau, window)) hits.push_back(*p);
    }
    row.plateau_count = hits.size();
    if (!hits.empty()) {
      const Quartiles q = quartiles(hits);
      row.median_iteration = q.median;
      row.iqr_low = q.q1;
      row.iqr_high = q.q3;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mirrorloop
