// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "mirrorloop/analysis.hpp"
#include "support.hpp"

using namespace mirrorloop;
using mltest::fixture_sequence;

namespace {

// Ten deltas whose early (1-2) and late (6-7) windows average to the given
// values; the remaining iterations interpolate.
std::vector<double> shaped(double early, double late) {
  const double mid = (early + late) / 2.0;
  return {early, early, mid, mid, mid, late, late, late, late, late};
}

std::vector<double> grounded_shape(double at2, double at4) {
  return {at2, at2, at2, at4, at4, at4, at4, at4, at4, at4};
}

std::vector<SequenceRecord> table_fixture() {
  std::vector<SequenceRecord> s;
  const std::pair<const char*, std::pair<double, double>> models[] = {
      {"gpt-4o-mini", {0.172, 0.071}},
      {"claude-3-haiku", {0.143, 0.023}},
      {"gemini-2.0-flash", {0.265, 0.167}},
  };
  for (const auto& [m, v] : models) {
    s.push_back(fixture_sequence(m, Condition::kUngrounded, shaped(v.first, v.second)));
  }
  return s;
}

}  // namespace

TEST(Summary, ConstantFixtureHalves) {
  std::vector<SequenceRecord> s;
  for (int i = 0; i < 4; ++i) {
    s.push_back(fixture_sequence("scripted:a", Condition::kUngrounded, shaped(0.2, 0.1),
                                 "t" + std::to_string(i)));
  }
  const auto rows = early_late_summary(s, GroupBy::kPooled);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].model, "pooled");
  EXPECT_EQ(rows[0].sequences, 4u);
  EXPECT_NEAR(rows[0].reduction_pct, 50.0, 1e-9);
  EXPECT_FALSE(rows[0].grounding_rebound_pct.has_value());
}

TEST(Summary, ReportedPooledMeans) {
  // 0.193 -> 0.087 is a 54.92% reduction; reported as 55%.
  EXPECT_NEAR(reduction_pct(0.193, 0.087), 54.92, 0.01);
  EXPECT_NEAR(reduction_pct(0.193, 0.087), 55.0, 0.5);
}

TEST(Summary, ReportedPerModelRows) {
  const auto rows = early_late_summary(table_fixture(), GroupBy::kModel);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].model, "openai:gpt-4o-mini");
  EXPECT_EQ(rows[1].model, "anthropic:claude-3-haiku-20240307");
  EXPECT_EQ(rows[2].model, "google:gemini-2.0-flash");
  // Recomputed from the rounded means; the reported percentages differ by
  // rounding only.
  const double reported[] = {58.6, 84.3, 36.8};
  const double recomputed[] = {58.72, 83.92, 36.98};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(rows[i].reduction_pct, recomputed[i], 0.01) << i;
    EXPECT_NEAR(rows[i].reduction_pct, reported[i], 0.5) << i;
  }
}

TEST(Rebound, ReportedPooledEffect) {
  std::vector<SequenceRecord> s;
  s.push_back(fixture_sequence("scripted:a", Condition::kGrounded, grounded_shape(0.148, 0.190)));
  const auto r = grounding_rebound(s);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(*r, 28.38, 0.01);
  EXPECT_NEAR(*r, 28.4, 0.05);
}

TEST(Rebound, SimpleFixtures) {
  std::vector<SequenceRecord> s = {
      fixture_sequence("scripted:a", Condition::kGrounded, grounded_shape(0.10, 0.12))};
  EXPECT_NEAR(*grounding_rebound(s), 20.0, 1e-9);
  s = {fixture_sequence("scripted:a", Condition::kGrounded, grounded_shape(0.1, 0.1))};
  EXPECT_DOUBLE_EQ(*grounding_rebound(s), 0.0);
  Warnings w;
  EXPECT_FALSE(grounding_rebound({}, {}, &w).has_value());
  EXPECT_EQ(w.size(), 1u);
  s = {fixture_sequence("scripted:a", Condition::kGrounded, grounded_shape(0.0, 0.1))};
  EXPECT_FALSE(grounding_rebound(s).has_value());
}

TEST(Rebound, AttachedToSummaryRows) {
  auto s = table_fixture();
  s.push_back(fixture_sequence("gpt-4o-mini", Condition::kGrounded, grounded_shape(0.1, 0.15)));
  const auto rows = early_late_summary(s, GroupBy::kModel);
  EXPECT_NEAR(*rows[0].grounding_rebound_pct, 50.0, 1e-9);
  EXPECT_FALSE(rows[1].grounding_rebound_pct.has_value());
  const auto pooled = early_late_summary(s, GroupBy::kPooled);
  EXPECT_NEAR(*pooled[0].grounding_rebound_pct, 50.0, 1e-9);
}

TEST(Summary, IncompleteAndEmptyGroupsWarn) {
  auto s = table_fixture();
  s[1].complete = false;
  Warnings w;
  const auto rows = early_late_summary(s, GroupBy::kModel, {}, &w);
  EXPECT_EQ(rows.size(), 2u);
  EXPECT_EQ(w.size(), 2u);  // excluded sequence, omitted row
  Warnings w2;
  EXPECT_TRUE(early_late_summary({}, GroupBy::kPooled, {}, &w2).empty());
  EXPECT_EQ(w2.size(), 1u);
}

TEST(Summary, ExclusionOfFlaggedSequencesKeepsPattern) {
  std::vector<SequenceRecord> s;
  for (int i = 0; i < 10; ++i) {
    s.push_back(fixture_sequence("scripted:a", Condition::kUngrounded,
                                 shaped(0.2 + 0.01 * i, 0.09), "t" + std::to_string(i)));
  }
  s[3].iterations[5].compliance_flags = {ComplianceFlag::kConstraintNote};
  s[7].iterations[2].compliance_flags = {ComplianceFlag::kClarificationRequest};
  const auto kept = exclude_flagged(s);
  EXPECT_EQ(kept.size(), 8u);
  const double all = early_late_summary(s, GroupBy::kPooled)[0].reduction_pct;
  const double clean = early_late_summary(kept, GroupBy::kPooled)[0].reduction_pct;
  EXPECT_GT(clean, 50.0);
  EXPECT_NEAR(all, clean, 2.0);
}

TEST(Bootstrap, QuantileInterpolates) {
  EXPECT_DOUBLE_EQ(quantile_sorted({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted({1, 2, 3, 4}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted({1, 2, 3, 4}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted({0, 10}, 0.025), 0.25);
}

TEST(Bootstrap, SingleSequenceCollapses) {
  const std::vector<SequenceRecord> s = {
      fixture_sequence("scripted:a", Condition::kUngrounded, shaped(0.2, 0.1))};
  const auto curve = trajectory_curves(s, Metric::kDeltaI);
  ASSERT_EQ(curve.size(), 10u);
  for (const auto& p : curve) {
    EXPECT_EQ(p.n, 1u);
    EXPECT_EQ(p.ci_low, p.mean);
    EXPECT_EQ(p.ci_high, p.mean);
  }
  EXPECT_EQ(curve[0].mean, 0.2);
}

TEST(Bootstrap, DeterministicAndBracketsMean) {
  std::vector<SequenceRecord> s;
  mltest::Gen g(51);
  for (int i = 0; i < 12; ++i) {
    std::vector<double> d(10);
    for (auto& x : d) x = g.real(0.0, 0.4);
    s.push_back(fixture_sequence("scripted:a", i % 2 ? Condition::kGrounded
                                                     : Condition::kUngrounded,
                                 d, "t" + std::to_string(i)));
  }
  const auto a = all_trajectory_curves(s), b = all_trajectory_curves(s);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 5u * 2u * 10u);
  EXPECT_EQ(a.front().condition, Condition::kUngrounded);
  for (const auto& p : a) {
    EXPECT_LE(p.ci_low, p.mean);
    EXPECT_GE(p.ci_high, p.mean);
    EXPECT_EQ(p.n, 6u);
  }
  BootstrapSpec other;
  other.seed = 1;
  EXPECT_NE(all_trajectory_curves(s, other), a);
  other.resamples = 0;
  EXPECT_THROW(all_trajectory_curves(s, other), ConfigError);
}

TEST(Strata, SplitByInitialCorrectness) {
  auto make = [](TaskFamily f, Condition c, std::vector<Correctness> marks) {
    auto s = fixture_sequence("scripted:a", c, std::vector<double>(marks.size() - 1, 0.1));
    s.task.family = f;
    for (std::size_t i = 0; i < marks.size(); ++i) s.iterations[i].correctness = marks[i];
    return s;
  };
  const auto C = Correctness::kCorrect, I = Correctness::kIncorrect;
  std::vector<SequenceRecord> s = {
      make(TaskFamily::kArithmetic, Condition::kUngrounded, {C, C, I}),
      make(TaskFamily::kArithmetic, Condition::kUngrounded, {C, C, C}),
      make(TaskFamily::kArithmetic, Condition::kGrounded, {I, I, C}),
      make(TaskFamily::kReflection, Condition::kGrounded, {I, I, C}),
  };
  const auto rows = correctness_stratification(s);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].condition, Condition::kUngrounded);
  EXPECT_TRUE(rows[0].initially_correct);
  EXPECT_EQ(rows[0].sequences, 2u);
  EXPECT_EQ(rows[0].accuracy, (std::vector<double>{1.0, 1.0, 0.5}));
  EXPECT_FALSE(rows[1].initially_correct);
  EXPECT_EQ(rows[1].accuracy, (std::vector<double>{0.0, 0.0, 1.0}));

  std::ostringstream out;
  write_strata(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), kStrataCsvHeader);
  EXPECT_NE(out.str().find("arithmetic,ungrounded,1,2,2,0.5\n"), std::string::npos);
}

TEST(Export, CurveCsvRoundTrip) {
  std::vector<SequenceRecord> s;
  for (int i = 0; i < 5; ++i) {
    s.push_back(fixture_sequence("scripted:a", Condition::kUngrounded,
                                 shaped(0.2 + 0.013 * i, 0.1), "t" + std::to_string(i)));
  }
  const auto curves = all_trajectory_curves(s);
  std::ostringstream out;
  write_curves(out, curves);
  std::istringstream in(out.str());
  const auto back = read_curves_csv(in);
  ASSERT_EQ(back.size(), curves.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].iteration, curves[i].iteration);
    EXPECT_EQ(back[i].metric, curves[i].metric);
    EXPECT_EQ(back[i].n, curves[i].n);
    EXPECT_NEAR(back[i].mean, curves[i].mean, 1e-6 * std::abs(curves[i].mean) + 1e-12);
  }
  std::ostringstream again;
  write_curves(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Export, SummaryRoundTripAndHeaderOnly) {
  const auto rows = early_late_summary(table_fixture(), GroupBy::kModel);
  std::ostringstream out;
  write_summary(out, rows);
  std::istringstream in(out.str());
  const auto back = read_summary_csv(in);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].model, rows[1].model);
  EXPECT_FALSE(back[1].grounding_rebound_pct.has_value());

  std::ostringstream empty_summary, empty_curves;
  write_summary(empty_summary, {});
  write_curves(empty_curves, {});
  EXPECT_EQ(empty_summary.str(), std::string(kSummaryCsvHeader) + "\n");
  EXPECT_EQ(empty_curves.str(), "iteration,metric,condition,mean,ci_low,ci_high,n\n");

  std::istringstream wrong("a,b,c\n");
  try {
    read_curves_csv(wrong);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Export, JsonlCarriesSameValues) {
  const auto rows = early_late_summary(table_fixture(), GroupBy::kModel);
  std::ostringstream out;
  write_summary(out, rows, ExportFormat::kJsonl);
  std::istringstream in(out.str());
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["model"], rows[i].model);
    EXPECT_EQ(fmt6(j["reduction_pct"].get<double>()), fmt6(rows[i].reduction_pct));
    EXPECT_TRUE(j["grounding_rebound_pct"].is_null());
    ++i;
  }
  EXPECT_EQ(i, 3u);
  EXPECT_THROW(parse_export_format("xml"), ConfigError);
}

TEST(Export, Fmt6) {
  EXPECT_EQ(fmt6(0.0), "0");
  EXPECT_EQ(fmt6(-0.0), "0");
  EXPECT_EQ(fmt6(54.9222797927), "54.9223");
  EXPECT_EQ(fmt6(1e-7), "1e-07");
}

TEST(Table, PrintsSignedPercentages) {
  auto s = table_fixture();
  s.push_back(fixture_sequence("gpt-4o-mini", Condition::kGrounded, grounded_shape(0.148, 0.190)));
  auto rows = early_late_summary(s, GroupBy::kModel);
  const auto pooled = early_late_summary(s, GroupBy::kPooled);
  rows.insert(rows.end(), pooled.begin(), pooled.end());
  std::ostringstream out;
  print_table(out, rows);
  const std::string t = out.str();
  EXPECT_NE(t.find("Early dI (1-2)"), std::string::npos);
  EXPECT_NE(t.find("Grounding Effect"), std::string::npos);
  EXPECT_NE(t.find("-58.7%"), std::string::npos);
  EXPECT_NE(t.find("-83.9%"), std::string::npos);
  EXPECT_NE(t.find("+28.4%"), std::string::npos);
  EXPECT_NE(t.find("Anthropic"), std::string::npos);
  EXPECT_NE(t.find("Pooled"), std::string::npos);
  EXPECT_NE(t.find("n/a"), std::string::npos);
}
