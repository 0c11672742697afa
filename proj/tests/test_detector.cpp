// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mirrorloop/detector.hpp"
#include "support.hpp"

using namespace mirrorloop;

TEST(Detector, HandComputedExampleFlagsAtFive) {
  const std::vector<double> drift = {0.3, 0.2, 0.04, 0.04, 0.04};
  const std::vector<double> novelty = {0.5, 0.3, 0.04, 0.03, 0.02};
  MirrorLoopDetector d;
  std::vector<bool> looping;
  for (int i = 0; i < 5; ++i) looping.push_back(d.observe(drift[i], novelty[i], i + 1).looping);
  EXPECT_EQ(looping, (std::vector<bool>{false, false, false, false, true}));
  EXPECT_EQ(d.flagged_at(), 5);
  EXPECT_EQ(detect_loop_batch(drift, novelty, {}), 5);
}

TEST(Detector, WindowMeansReported) {
  MirrorLoopDetector d;
  d.observe(0.3, 0.5, 1);
  d.observe(0.2, 0.3, 2);
  d.observe(0.04, 0.04, 3);
  d.observe(0.04, 0.03, 4);
  const auto v = d.observe(0.04, 0.02, 5);
  EXPECT_NEAR(v.window_drift_mean, 0.04, 1e-15);
  EXPECT_NEAR(v.window_novelty_mean, 0.03, 1e-15);
}

TEST(Detector, NeverFlagsAboveThresholds) {
  MirrorLoopDetector d;
  for (int i = 1; i <= 20; ++i) EXPECT_FALSE(d.observe(0.5, 0.5, i).looping);
}

TEST(Detector, NeedsFullWindow) {
  MirrorLoopDetector d;
  EXPECT_FALSE(d.observe(0.0, 0.0, 1).looping);
  EXPECT_FALSE(d.observe(0.0, 0.0, 2).looping);
  EXPECT_TRUE(d.observe(0.0, 0.0, 3).looping);
}

TEST(Detector, RequiresBothSignals) {
  EXPECT_FALSE(detect_loop_batch({0.0, 0.0, 0.0}, {0.2, 0.2, 0.2}, {}).has_value());
  EXPECT_FALSE(detect_loop_batch({0.2, 0.2, 0.2}, {0.0, 0.0, 0.0}, {}).has_value());
}

TEST(Detector, FirstFlagIsSticky) {
  MirrorLoopDetector d;
  for (int i = 1; i <= 3; ++i) d.observe(0.0, 0.0, i);
  const auto v = d.observe(0.9, 0.9, 4);
  EXPECT_TRUE(v.looping);
  EXPECT_EQ(v.first_flag_iteration, 3);
}

TEST(Detector, OutOfOrderIsSequencingError) {
  MirrorLoopDetector d;
  d.observe(0.1, 0.1, 2);
  EXPECT_THROW(d.observe(0.1, 0.1, 2), SequencingError);
  EXPECT_THROW(d.observe(0.1, 0.1, 1), SequencingError);
  EXPECT_THROW(MirrorLoopDetector{}.observe(0.1, 0.1, 0), SequencingError);
}

TEST(Detector, InvalidConfigRejected) {
  EXPECT_THROW(MirrorLoopDetector(DetectorConfig{1, 0.05, 0.05}), ConfigError);
  EXPECT_THROW(MirrorLoopDetector(DetectorConfig{3, 0.0, 0.05}), ConfigError);
  EXPECT_THROW(detect_loop_batch({0.1}, {0.1, 0.2}, {}), PreconditionError);
}

TEST(DetectorProperty, OnlineMatchesBatchAndStateIsBounded) {
  mltest::Gen g(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = g.size(30);
    std::vector<double> drift(n), novelty(n);
    for (std::size_t i = 0; i < n; ++i) {
      drift[i] = g.real(0.0, 0.12);
      novelty[i] = g.real(0.0, 0.12);
    }
    DetectorConfig cfg{2 + g.size(3), 0.05, 0.05};
    MirrorLoopDetector d(cfg);
    std::optional<int> online;
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = d.observe(drift[i], novelty[i], static_cast<int>(i + 1));
      EXPECT_LE(d.window_size(), cfg.window);
      if (v.looping && !online) online = static_cast<int>(i + 1);
    }
    EXPECT_EQ(online, detect_loop_batch(drift, novelty, cfg));
  }
}

TEST(Plateau, HandComputedExamples) {
  const std::vector<double> s = {0.20, 0.10, 0.04, 0.04, 0.03, 0.02};
  EXPECT_EQ(plateau_iteration(s, 0.05), 5);
  EXPECT_FALSE(plateau_iteration(s, 0.02).has_value());
  EXPECT_EQ(plateau_iteration(std::vector<double>(10, 0.0), 0.05), 3);
  EXPECT_FALSE(plateau_iteration({0.0, 0.0}, 0.05).has_value());
}

TEST(Quartiles, HalvesMethod) {
  const auto q = quartiles({5, 5, 5, 5, 5, 6, 6, 6, 6});
  EXPECT_EQ(q.median, 5);
  EXPECT_EQ(q.q1, 5);
  EXPECT_EQ(q.q3, 6);
  const auto e = quartiles({1, 2, 3, 4});
  EXPECT_EQ(e.median, 2.5);
  EXPECT_EQ(e.q1, 1.5);
  EXPECT_EQ(e.q3, 3.5);
  const auto one = quartiles({7});
  EXPECT_EQ(one.q1, 7);
  EXPECT_EQ(one.q3, 7);
  EXPECT_THROW(quartiles({}), PreconditionError);
}

namespace {

// delta series that plateaus exactly at iteration p (p >= 3), or never.
std::vector<double> plateau_at(std::optional<int> p, int n = 10) {
  std::vector<double> s(static_cast<std::size_t>(n), 0.2);
  if (p) {
    for (int i = *p - 3; i < n; ++i) s[static_cast<std::size_t>(i)] = 0.01;
  }
  return s;
}

}  // namespace

TEST(Sensitivity, NineOfTwentyFourFixture) {
  std::vector<std::vector<double>> series;
  for (int p : {5, 5, 5, 5, 5, 6, 6, 6, 6}) series.push_back(plateau_at(p));
  for (int k = 0; k < 15; ++k) series.push_back(plateau_at(std::nullopt));
  ASSERT_EQ(series.size(), 24u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(plateau_iteration(series[i], 0.05), i < 5 ? 5 : 6);
  }
  const auto rows = sensitivity_sweep(series, {0.05});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].tau, 0.05);
  EXPECT_EQ(rows[0].sequences, 24u);
  EXPECT_EQ(rows[0].plateau_count, 9u);
  EXPECT_EQ(rows[0].median_iteration, 5.0);
  EXPECT_EQ(rows[0].iqr_low, 5.0);
  EXPECT_EQ(rows[0].iqr_high, 6.0);
}

TEST(Sensitivity, EmptyThresholdListAndEmptyInput) {
  EXPECT_TRUE(sensitivity_sweep({{0.1, 0.1, 0.1}}, {}).empty());
  EXPECT_THROW(sensitivity_sweep({}, {0.05}), PreconditionError);
  const auto rows = sensitivity_sweep({plateau_at(std::nullopt)}, {0.05});
  EXPECT_EQ(rows[0].plateau_count, 0u);
  EXPECT_FALSE(rows[0].median_iteration.has_value());
}

TEST(SensitivityProperty, StricterThresholdNeverAddsPlateaus) {
  mltest::Gen g(42);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<double>> series(1 + g.size(20));
    for (auto& s : series) {
      s.resize(10);
      for (auto& x : s) x = g.real(0.0, 0.15);
    }
    const auto rows = sensitivity_sweep(series, {0.10, 0.05, 0.03, 0.02, 0.01});
    for (std::size_t r = 1; r < rows.size(); ++r) {
      EXPECT_LE(rows[r].plateau_count, rows[r - 1].plateau_count);
    }
    for (const auto& s : series) {
      const auto loose = plateau_iteration(s, 0.05), strict = plateau_iteration(s, 0.02);
      if (strict) {
        ASSERT_TRUE(loose.has_value());
        EXPECT_LE(*loose, *strict);
      }
    }
  }
}
