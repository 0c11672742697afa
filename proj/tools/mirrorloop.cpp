// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "mirrorloop/cli.hpp"
#include "mirrorloop/http_transport.hpp"

namespace ml = mirrorloop;
namespace cli = mirrorloop::cli;

int main(int argc, char** argv) {
  CLI::App app{
      "mirrorloop: recursive self-critique experiments and mirror-loop "
      "diagnostics.\n\n"
      "Credentials are read from the environment only:\n"
      "  OPENAI_API_KEY     OpenAI models and the remote embedder default\n"
      "  ANTHROPIC_API_KEY  Anthropic models\n"
      "  GEMINI_API_KEY     Google models\n\n"
      "Exit codes: 0 ok, 1 config/input error, 2 provider error, "
      "3 loop detected (--fail-on-loop)."};
  app.require_subcommand(1);

  cli::RunOptions run_opts;
  std::string config_path;
  std::uint64_t seed = 0;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "Override the master seed");
    sub->add_option("--parallelism", run_opts.parallelism,
                    "Concurrent sequences (default 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--output", run_opts.output,
                    "Output directory for transcript.jsonl (default: out)");
    sub->add_option("--condition", run_opts.conditions,
                    "Restrict to condition(s): grounded, ungrounded");
    sub->add_option("--model", run_opts.models,
                    "Override model list (alias or vendor:model)");
    sub->add_flag("--debug-wire", run_opts.debug_wire,
                  "Log request and response bodies to stderr");
  };
  auto* run = app.add_subcommand("run", "Run the configured experiment");
  add_run_flags(run);
  auto* simulate = app.add_subcommand(
      "simulate", "Run the experiment offline against scripted providers");
  add_run_flags(simulate);

  cli::AnalyzeOptions analyze_opts;
  std::string format = "csv";
  auto* analyze = app.add_subcommand("analyze", "Summary statistics and curves");
  analyze->add_option("transcripts", analyze_opts.transcripts, "Transcript JSONL")
      ->required();
  analyze->add_option("--output", analyze_opts.output,
                      "Output directory (default: analysis)");
  analyze->add_option("--format", format, "csv or jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  analyze->add_option("--seed", analyze_opts.bootstrap_seed, "Bootstrap seed");
  analyze->add_option("--resamples", analyze_opts.resamples, "Bootstrap resamples")
      ->check(CLI::PositiveNumber);

  cli::DetectOptions detect_opts;
  auto* detect = app.add_subcommand("detect", "Apply the loop detector to transcripts");
  detect->add_option("transcripts", detect_opts.transcripts, "Transcript JSONL")
      ->required();
  detect->add_flag("--fail-on-loop", detect_opts.fail_on_loop,
                   "Exit 3 if any sequence is flagged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  cli::Context ctx;
  ctx.transport = [](const ml::ProviderSettings& s) {
    return std::make_shared<ml::HttplibTransport>(
        std::chrono::seconds{s.timeout_seconds});
  };

  if (!config_path.empty()) run_opts.config_path = config_path;
  if (run->parsed() || simulate->parsed()) {
    CLI::App* sub = run->parsed() ? run : simulate;
    if (sub->count("--seed") > 0) run_opts.seed = seed;
    return run->parsed() ? cli::cmd_run(run_opts, ctx)
                         : cli::cmd_simulate(run_opts, ctx);
  }
  if (analyze->parsed()) {
    analyze_opts.format = ml::parse_export_format(format);
    return cli::cmd_analyze(analyze_opts, ctx);
  }
  return cli::cmd_detect(detect_opts, ctx);
}
