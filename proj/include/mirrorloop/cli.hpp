// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind the mirrorloop executable. Streams,
// environment lookup and the HTTP transport are injected so the commands
// can be exercised in-process.
//
// Exit codes: 0 success, 1 configuration or input error, 2 provider
// error (including a missing credential), 3 loop detected with
// --fail-on-loop.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mirrorloop/analysis.hpp"
#include "mirrorloop/config.hpp"
#include "mirrorloop/detector.hpp"
#include "mirrorloop/runner.hpp"
#include "mirrorloop/scripted_provider.hpp"
#include "mirrorloop/transcript.hpp"

namespace mirrorloop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitProvider = 2;
inline constexpr int kExitLoop = 3;

inline constexpr std::string_view kTranscriptFile = "transcript.jsonl";

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
using TransportFactory =
    std::function<std::shared_ptr<Transport>(const ProviderSettings&)>;

inline EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
}

struct Context {
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
  EnvLookup env = process_env();
  TransportFactory transport;  // required for live providers
  Sleeper sleeper = real_sleeper();
};

struct RunOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::size_t parallelism = 1;
  std::string output = "out";
  std::vector<std::string> conditions;
  std::vector<std::string> models;
  bool debug_wire = false;
};

// Loads the config file (or defaults) and applies command-line overrides.
inline RunConfig resolve_config(const RunOptions& o) {
  RunConfig cfg = o.config_path ? load_run_config(*o.config_path) : RunConfig{};
  if (o.seed) cfg.seed = *o.seed;
  if (!o.conditions.empty()) {
    cfg.conditions.clear();
    for (const auto& c : o.conditions) cfg.conditions.push_back(parse_condition(c));
  }
  if (!o.models.empty()) {
    cfg.models.clear();
    for (const auto& m : o.models) cfg.models.push_back(ProviderId::parse(m));
  }
  cfg.validate();
  return cfg;
}

// Every environment variable the configuration needs, in a stable order.
inline std::vector<std::string> required_credentials(const RunConfig& cfg) {
  std::vector<std::string> vars;
  auto add = [&](const std::string& v) {
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  };
  for (const auto& m : cfg.models) {
    if (const char* v = credential_env_var(m.vendor)) add(v);
  }
  if (cfg.embedder.kind == EmbedderKind::kRemote) add(cfg.embedder.api_key_env);
  return vars;
}

namespace detail {

inline std::string vendor_key(Vendor v) { return to_string(v); }

inline RunSummary execute(const RunConfig& cfg, const RunOptions& o, Context& ctx) {
  const auto tasks = experiment_tasks(cfg);
  std::shared_ptr<Transport> transport;
  auto get_transport = [&]() -> std::shared_ptr<Transport> {
    if (!transport) {
      if (!ctx.transport) throw ConfigError("no HTTP transport available");
      transport = ctx.transport(cfg.providers);
    }
    return transport;
  };

  std::map<std::string, std::shared_ptr<RateLimiter>> limiters;
  WireLog wire;
  if (o.debug_wire) {
    std::ostream* err = ctx.err;
    auto mu = std::make_shared<std::mutex>();
    wire = [err, mu](std::string_view dir, const std::string& provider,
                     std::string_view body) {
      std::lock_guard lock(*mu);
      *err << "[wire " << dir << " " << provider << "] " << body << '\n';
    };
  }

  ProviderFactory make_provider = [&](const ProviderId& id)
      -> std::shared_ptr<ChatProvider> {
    if (id.vendor == Vendor::kScripted) {
      return std::make_shared<ScriptedProvider>(cfg.scripted, tasks,
                                                cfg.critique_template, id.model);
    }
    const std::string var = credential_env_var(id.vendor);
    const std::string key = ctx.env(var).value_or("");
    std::optional<std::string> base_url;
    if (auto it = cfg.providers.base_urls.find(vendor_key(id.vendor));
        it != cfg.providers.base_urls.end()) {
      base_url = it->second;
    }
    std::shared_ptr<RateLimiter> limiter;
    if (cfg.providers.requests_per_minute > 0.0) {
      auto& slot = limiters[vendor_key(id.vendor)];
      if (!slot) slot = std::make_shared<RateLimiter>(cfg.providers.requests_per_minute);
      limiter = slot;
    }
    return std::make_shared<HttpChatProvider>(
        id, make_adapter(id.vendor, base_url), get_transport(), key,
        cfg.providers.retry_policy(), limiter, ctx.sleeper, wire);
  };

  EmbedderFactory make_embedder = [&]() -> std::unique_ptr<Embedder> {
    if (cfg.embedder.kind == EmbedderKind::kHashing) {
      return std::make_unique<HashingEmbedder>(cfg.embedder);
    }
    const std::string key = ctx.env(cfg.embedder.api_key_env).value_or("");
    return std::make_unique<RemoteEmbedder>(cfg.embedder, get_transport(), key,
                                            cfg.providers.retry_policy(), nullptr,
                                            ctx.sleeper);
  };
  // Transports are created lazily from worker threads; build it up front.
  for (const auto& m : cfg.models) {
    if (m.vendor != Vendor::kScripted) get_transport();
  }
  if (cfg.embedder.kind == EmbedderKind::kRemote) get_transport();

  std::filesystem::create_directories(o.output);
  const std::string path = (std::filesystem::path(o.output) / kTranscriptFile).string();
  TranscriptWriter writer(path, cfg);
  const std::size_t planned = plan_jobs(cfg, tasks).size();
  std::size_t committed = 0;
  std::ostream& out = *ctx.out;
  SequenceSink sink = [&](const SequenceRecord& rec) {
    writer.write(rec);
    ++committed;
    out << "[" << committed << "/" << planned << "] " << rec.sequence_id << " "
        << (rec.complete ? "complete" : "FAILED: " + rec.failure) << '\n';
  };
  RunSummary s = run_experiment(cfg, tasks, make_provider, make_embedder, sink,
                                o.parallelism);
  out << "sequences completed: " << s.completed << ", failed: " << s.failed << '\n';
  out << "transcript: " << path << '\n';
  out << "config fingerprint: " << config_fingerprint(cfg) << '\n';
  return s;
}

}  // namespace detail

inline int cmd_run(const RunOptions& o, Context& ctx) {
  RunConfig cfg;
  try {
    cfg = resolve_config(o);
  } catch (const std::exception& e) {
    *ctx.err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  for (const auto& var : required_credentials(cfg)) {
    if (!ctx.env(var)) {
      *ctx.err << "provider error: environment variable " << var
               << " is not set\n";
      return kExitProvider;
    }
  }
  try {
    const RunSummary s = detail::execute(cfg, o, ctx);
    return s.failed > 0 ? kExitProvider : kExitOk;
  } catch (const ProviderError& e) {
    *ctx.err << "provider error: " << e.what() << '\n';
    return kExitProvider;
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

// The full protocol against scripted providers only; live models in the
// configuration are replaced by scripted stand-ins of the same name.
inline int cmd_simulate(const RunOptions& o, Context& ctx) {
  RunConfig cfg;
  try {
    cfg = resolve_config(o);
    for (auto& m : cfg.models) m.vendor = Vendor::kScripted;
    cfg.embedder.kind = EmbedderKind::kHashing;
    cfg.logical_clock = true;
    cfg.validate();
  } catch (const std::exception& e) {
    *ctx.err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const RunSummary s = detail::execute(cfg, o, ctx);
    return s.failed > 0 ? kExitProvider : kExitOk;
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

struct AnalyzeOptions {
  std::string transcripts;
  std::string output = "analysis";
  ExportFormat format = ExportFormat::kCsv;
  std::uint64_t bootstrap_seed = BootstrapSpec{}.seed;
  std::size_t resamples = 1000;
};

inline int cmd_analyze(const AnalyzeOptions& o, Context& ctx) {
  Transcript t;
  try {
    t = load_sequences(o.transcripts);
  } catch (const std::exception& e) {
    *ctx.err << "cannot read transcripts: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    std::filesystem::create_directories(o.output);
    const std::string ext = o.format == ExportFormat::kCsv ? ".csv" : ".jsonl";
    const auto dir = std::filesystem::path(o.output);

    Warnings warnings;
    std::vector<SummaryRow> rows;
    if (!t.sequences.empty()) {
      rows = early_late_summary(t.sequences, GroupBy::kModel, {}, &warnings);
      auto pooled = early_late_summary(t.sequences, GroupBy::kPooled, {}, nullptr);
      if (!pooled.empty()) {
        pooled.front().grounding_rebound_pct =
            grounding_rebound(t.sequences, {}, &warnings);
        rows.push_back(pooled.front());
      }
    }
    BootstrapSpec spec;
    spec.seed = o.bootstrap_seed;
    spec.resamples = o.resamples;
    const auto curves = all_trajectory_curves(t.sequences, spec);
    const auto strata = correctness_stratification(t.sequences);

    export_to_file((dir / ("summary" + ext)).string(),
                   [&](std::ostream& s) { write_summary(s, rows, o.format); });
    export_to_file((dir / ("curves" + ext)).string(),
                   [&](std::ostream& s) { write_curves(s, curves, o.format); });
    export_to_file((dir / "strata.csv").string(),
                   [&](std::ostream& s) { write_strata(s, strata); });

    std::ostream& out = *ctx.out;
    print_table(out, rows);
    std::size_t iterations = 0, flagged = 0;
    for (const auto& s : t.sequences) {
      for (const auto& it : s.iterations) {
        ++iterations;
        if (!it.compliance_flags.empty()) ++flagged;
      }
    }
    out << "compliance: " << flagged << " flagged of " << iterations
        << " iterations\n";
    if (flagged > 0) {
      const auto clean = exclude_flagged(t.sequences);
      const auto r = early_late_summary(clean, GroupBy::kPooled, {}, nullptr);
      if (!r.empty()) {
        out << "pooled reduction excluding flagged sequences: "
            << fmt6(r.front().reduction_pct) << "%\n";
      }
    }
    for (const auto& w : warnings) *ctx.err << "warning: " << w << '\n';
    out << "wrote " << (dir / ("summary" + ext)).string() << ", "
        << (dir / ("curves" + ext)).string() << ", "
        << (dir / "strata.csv").string() << '\n';
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

struct DetectOptions {
  std::string transcripts;
  bool fail_on_loop = false;
};

inline int cmd_detect(const DetectOptions& o, Context& ctx) {
  Transcript t;
  try {
    t = load_sequences(o.transcripts);
  } catch (const std::exception& e) {
    *ctx.err << "cannot read transcripts: " << e.what() << '\n';
    return kExitConfig;
  }
  std::size_t flagged = 0;
  for (const auto& s : t.sequences) {
    std::vector<double> drift, novelty;
    for (const auto& it : s.iterations) {
      if (!it.metrics) continue;
      drift.push_back(it.metrics->embed_drift);
      novelty.push_back(it.metrics->ngram_novelty);
    }
    const auto at = detect_loop_batch(drift, novelty, t.config.detector);
    *ctx.out << s.sequence_id << ": ";
    if (at) {
      ++flagged;
      *ctx.out << "looping (first flagged at iteration " << *at << ")\n";
    } else {
      *ctx.out << "iterating\n";
    }
  }
  *ctx.out << flagged << " of " << t.sequences.size() << " sequences flagged\n";
  return o.fail_on_loop && flagged > 0 ? kExitLoop : kExitOk;
}

}  // namespace mirrorloop::cli
