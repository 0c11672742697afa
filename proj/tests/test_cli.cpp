// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mirrorloop/cli.hpp"
#include "support.hpp"

using namespace mirrorloop;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("mirrorloop_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

class CountingTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest&) override {
    ++calls;
    return {200, R"({"choices":[{"message":{"content":"ok"}}]})", {}};
  }
  int calls = 0;
};

struct Harness {
  std::ostringstream out, err;
  std::map<std::string, std::string> env;
  std::shared_ptr<CountingTransport> transport = std::make_shared<CountingTransport>();
  int transports_built = 0;

  cli::Context context() {
    cli::Context c;
    c.out = &out;
    c.err = &err;
    c.env = [this](const std::string& k) -> std::optional<std::string> {
      auto it = env.find(k);
      if (it == env.end()) return std::nullopt;
      return it->second;
    };
    c.transport = [this](const ProviderSettings&) -> std::shared_ptr<Transport> {
      ++transports_built;
      return transport;
    };
    c.sleeper = [](std::chrono::milliseconds) {};
    return c;
  }
};

std::string small_config_json() {
  return R"({"per_family_count": 2, "seed": 3})";
}

// Writes a transcript built from fixture sequences.
void write_fixture_transcript(const std::string& path,
                              const std::vector<SequenceRecord>& seqs) {
  RunConfig cfg;
  std::ofstream out(path);
  out << transcript_header(cfg).dump() << '\n';
  for (auto s : seqs) {
    s.task.initial_prompt = "p";
    persist_sequence(out, s);
  }
}

}  // namespace

TEST(Cli, MissingCredentialExitsBeforeAnyRequest) {
  TempDir dir("cred");
  Harness h;
  auto ctx = h.context();
  cli::RunOptions o;
  o.models = {"gpt-4o-mini"};
  o.output = dir / "out";
  EXPECT_EQ(cli::cmd_run(o, ctx), cli::kExitProvider);
  EXPECT_EQ(h.transport->calls, 0);
  EXPECT_EQ(h.transports_built, 0);
  EXPECT_NE(h.err.str().find("OPENAI_API_KEY"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, LiveRunUsesInjectedTransport) {
  TempDir dir("live");
  write_file(dir / "cfg.json", R"({"per_family_count": 2, "iterations": 3,
      "grounding_iteration": 2, "logical_clock": true})");
  Harness h;
  h.env["OPENAI_API_KEY"] = "test-key";
  auto ctx = h.context();
  cli::RunOptions o;
  o.config_path = dir / "cfg.json";
  o.models = {"gpt-4o-mini"};
  o.output = dir / "out";
  EXPECT_EQ(cli::cmd_run(o, ctx), cli::kExitOk) << h.err.str();
  EXPECT_EQ(h.transport->calls, 8 * 4);  // sequences x (N + 1)
  EXPECT_EQ(load_sequences(dir / "out/transcript.jsonl").record_count(), 32u);
}

TEST(Cli, SeedOverrideChangesFingerprint) {
  TempDir dir("seed");
  write_file(dir / "cfg.json", small_config_json());
  cli::RunOptions o;
  o.config_path = dir / "cfg.json";
  const auto a = cli::resolve_config(o);
  o.seed = 4;
  const auto b = cli::resolve_config(o);
  EXPECT_EQ(a.seed, 3u);
  EXPECT_EQ(b.seed, 4u);
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
}

TEST(Cli, UnknownConfigKeyIsConfigError) {
  TempDir dir("badkey");
  write_file(dir / "cfg.json", R"({"per_family_count": 2, "temprature": 0.5})");
  Harness h;
  auto ctx = h.context();
  cli::RunOptions o;
  o.config_path = dir / "cfg.json";
  o.output = dir / "out";
  EXPECT_EQ(cli::cmd_simulate(o, ctx), cli::kExitConfig);
  EXPECT_EQ(cli::cmd_run(o, ctx), cli::kExitConfig);
  EXPECT_NE(h.err.str().find("temprature"), std::string::npos);
  o.config_path = dir / "missing.json";
  EXPECT_EQ(cli::cmd_run(o, ctx), cli::kExitConfig);
}

TEST(Cli, SimulateIsByteIdenticalAcrossRuns) {
  TempDir dir("sim");
  write_file(dir / "cfg.json", small_config_json());
  std::string first;
  for (int run = 0; run < 2; ++run) {
    Harness h;
    auto ctx = h.context();
    cli::RunOptions o;
    o.config_path = dir / "cfg.json";
    o.models = {"gpt-4o-mini", "scripted:x"};
    o.parallelism = run == 0 ? 1 : 4;
    o.output = dir / ("out" + std::to_string(run));
    ASSERT_EQ(cli::cmd_simulate(o, ctx), cli::kExitOk) << h.err.str();
    EXPECT_EQ(h.transports_built, 0);
    const std::string text = slurp(dir / ("out" + std::to_string(run)) + "/transcript.jsonl");
    if (run == 0) {
      first = text;
      EXPECT_NE(h.out.str().find("sequences completed: 16, failed: 0"), std::string::npos);
    } else {
      EXPECT_EQ(text, first);
    }
  }
  const auto t = load_sequences(dir / "out0/transcript.jsonl");
  EXPECT_EQ(t.sequences.front().model.to_string(), "scripted:gpt-4o-mini");
  EXPECT_TRUE(verify_metrics(t).mismatches.empty());
}

TEST(Cli, AnalyzeEmptyTranscriptWritesHeaders) {
  TempDir dir("empty");
  write_fixture_transcript(dir / "t.jsonl", {});
  Harness h;
  auto ctx = h.context();
  cli::AnalyzeOptions o;
  o.transcripts = dir / "t.jsonl";
  o.output = dir / "analysis";
  EXPECT_EQ(cli::cmd_analyze(o, ctx), cli::kExitOk) << h.err.str();
  EXPECT_EQ(slurp(dir / "analysis/summary.csv"), std::string(kSummaryCsvHeader) + "\n");
  EXPECT_EQ(slurp(dir / "analysis/curves.csv"),
            "iteration,metric,condition,mean,ci_low,ci_high,n\n");
  EXPECT_EQ(slurp(dir / "analysis/strata.csv"), std::string(kStrataCsvHeader) + "\n");
}

TEST(Cli, AnalyzeFixtureIsDeterministic) {
  TempDir dir("analyze");
  std::vector<SequenceRecord> seqs;
  for (int i = 0; i < 4; ++i) {
    seqs.push_back(mltest::fixture_sequence(
        "scripted:a", Condition::kUngrounded,
        {0.2, 0.2, 0.15, 0.12, 0.11, 0.1, 0.1, 0.09, 0.09, 0.09}, "t" + std::to_string(i)));
    seqs.push_back(mltest::fixture_sequence(
        "scripted:a", Condition::kGrounded,
        {0.2, 0.1, 0.14, 0.12, 0.11, 0.1, 0.1, 0.09, 0.09, 0.09}, "t" + std::to_string(i)));
  }
  seqs[2].iterations[4].compliance_flags = {ComplianceFlag::kOther};
  write_fixture_transcript(dir / "t.jsonl", seqs);
  std::string first;
  for (int run = 0; run < 2; ++run) {
    Harness h;
    auto ctx = h.context();
    cli::AnalyzeOptions o;
    o.transcripts = dir / "t.jsonl";
    o.output = dir / ("a" + std::to_string(run));
    ASSERT_EQ(cli::cmd_analyze(o, ctx), cli::kExitOk) << h.err.str();
    const std::string curves = slurp(dir / ("a" + std::to_string(run)) + "/curves.csv");
    if (run == 0) {
      first = curves;
      EXPECT_NE(h.out.str().find("-50.0%"), std::string::npos) << h.out.str();
      EXPECT_NE(h.out.str().find("+20.0%"), std::string::npos) << h.out.str();
      EXPECT_NE(h.out.str().find("compliance: 1 flagged of 88 iterations"),
                std::string::npos);
    } else {
      EXPECT_EQ(curves, first);
    }
  }
  Harness h;
  auto ctx = h.context();
  cli::AnalyzeOptions o;
  o.transcripts = dir / "t.jsonl";
  o.output = dir / "jsonl";
  o.format = ExportFormat::kJsonl;
  ASSERT_EQ(cli::cmd_analyze(o, ctx), cli::kExitOk);
  EXPECT_TRUE(fs::exists(dir / "jsonl/curves.jsonl"));
}

TEST(Cli, AnalyzeRejectsCorruptTranscript) {
  TempDir dir("corrupt");
  write_file(dir / "t.jsonl", "not json\n");
  Harness h;
  auto ctx = h.context();
  cli::AnalyzeOptions o;
  o.transcripts = dir / "t.jsonl";
  o.output = dir / "analysis";
  EXPECT_EQ(cli::cmd_analyze(o, ctx), cli::kExitConfig);
  EXPECT_NE(h.err.str().find("line 1"), std::string::npos);
}

TEST(Cli, DetectExitCodes) {
  TempDir dir("detect");
  write_fixture_transcript(
      dir / "divergent.jsonl",
      {mltest::fixture_sequence("scripted:a", Condition::kUngrounded,
                                std::vector<double>(10, 0.4))});
  write_fixture_transcript(
      dir / "loop.jsonl",
      {mltest::fixture_sequence("scripted:a", Condition::kUngrounded,
                                {0.3, 0.2, 0.04, 0.03, 0.02, 0.01, 0.01, 0.01, 0.01, 0.01}),
       mltest::fixture_sequence("scripted:a", Condition::kGrounded,
                                std::vector<double>(10, 0.4))});
  {
    Harness h;
    auto ctx = h.context();
    EXPECT_EQ(cli::cmd_detect({dir / "divergent.jsonl", true}, ctx), cli::kExitOk);
    EXPECT_NE(h.out.str().find("0 of 1 sequences flagged"), std::string::npos);
  }
  {
    Harness h;
    auto ctx = h.context();
    EXPECT_EQ(cli::cmd_detect({dir / "loop.jsonl", true}, ctx), cli::kExitLoop);
    EXPECT_NE(h.out.str().find("looping (first flagged at iteration 5)"), std::string::npos)
        << h.out.str();
    EXPECT_NE(h.out.str().find("1 of 2 sequences flagged"), std::string::npos);
  }
  {
    Harness h;
    auto ctx = h.context();
    EXPECT_EQ(cli::cmd_detect({dir / "loop.jsonl", false}, ctx), cli::kExitOk);
  }
}
