// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// The self-critique protocol. Index 0 is the initial answer; indices 1..N
// are refinements, each produced from the previous output alone. In the
// grounded condition the refinement at the grounding iteration g also
// carries verifier evidence; every other index uses the plain critique
// prompt.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirrorloop/answers.hpp"
#include "mirrorloop/detector.hpp"
#include "mirrorloop/embedder.hpp"
#include "mirrorloop/grounding.hpp"
#include "mirrorloop/provider.hpp"
#include "mirrorloop/rng.hpp"
#include "mirrorloop/scripted_provider.hpp"
#include "mirrorloop/tasks.hpp"
#include "mirrorloop/textmetrics.hpp"

namespace mirrorloop {

enum class Condition { kUngrounded, kGrounded };

inline std::string to_string(Condition c) {
  return c == Condition::kGrounded ? "grounded" : "ungrounded";
}

inline Condition parse_condition(std::string_view s) {
  if (s == "grounded") return Condition::kGrounded;
  if (s == "ungrounded") return Condition::kUngrounded;
  throw ConfigError("unknown condition '" + std::string(s) + "'");
}

enum class ComplianceFlag { kRefusal, kClarificationRequest, kConstraintNote, kOther };

inline std::string to_string(ComplianceFlag f) {
  switch (f) {
    case ComplianceFlag::kRefusal: return "refusal";
    case ComplianceFlag::kClarificationRequest: return "clarification_request";
    case ComplianceFlag::kConstraintNote: return "constraint_note";
    case ComplianceFlag::kOther: return "other";
  }
  return "?";
}

inline ComplianceFlag parse_compliance_flag(std::string_view s) {
  for (auto f : {ComplianceFlag::kRefusal, ComplianceFlag::kClarificationRequest,
                 ComplianceFlag::kConstraintNote, ComplianceFlag::kOther}) {
    if (to_string(f) == s) return f;
  }
  throw ParseError(0, "unknown compliance flag '" + std::string(s) + "'");
}

enum class Correctness { kCorrect, kIncorrect, kNotApplicable };

inline std::string to_string(Correctness c) {
  switch (c) {
    case Correctness::kCorrect: return "correct";
    case Correctness::kIncorrect: return "incorrect";
    case Correctness::kNotApplicable: return "not_applicable";
  }
  return "?";
}

inline Correctness parse_correctness(std::string_view s) {
  if (s == "correct") return Correctness::kCorrect;
  if (s == "incorrect") return Correctness::kIncorrect;
  if (s == "not_applicable") return Correctness::kNotApplicable;
  throw ParseError(0, "unknown correctness '" + std::string(s) + "'");
}

struct ForkSettings {
  bool enabled = false;
  double temperature_a = 0.7;
  double temperature_b = 1.2;
  friend bool operator==(const ForkSettings&, const ForkSettings&) = default;
};

// HTTP behaviour shared by all live providers.
struct ProviderSettings {
  double requests_per_minute = 0.0;  // 0: unlimited
  int max_attempts = 5;
  int base_delay_ms = 500;
  int max_delay_ms = 30000;
  int timeout_seconds = 120;
  // Vendor name -> base URL override, e.g. for a local gateway.
  std::map<std::string, std::string> base_urls;

  void validate() const {
    if (!(requests_per_minute >= 0.0)) {
      throw ConfigError("requests_per_minute must be >= 0");
    }
    if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (base_delay_ms < 0 || max_delay_ms < base_delay_ms) {
      throw ConfigError("retry delays must satisfy 0 <= base <= max");
    }
    if (timeout_seconds <= 0) throw ConfigError("timeout_seconds must be positive");
  }

  RetryPolicy retry_policy() const {
    RetryPolicy p;
    p.max_attempts = max_attempts;
    p.base_delay = std::chrono::milliseconds{base_delay_ms};
    p.max_delay = std::chrono::milliseconds{max_delay_ms};
    return p;
  }

  friend bool operator==(const ProviderSettings&, const ProviderSettings&) = default;
};

struct RunConfig {
  std::vector<ProviderId> models = {ProviderId{}};
  int iterations = 10;
  int grounding_iteration = 3;
  // 0: ground once at grounding_iteration. p > 0: also every p iterations
  // after it (mandatory periodic grounding).
  int grounding_period = 0;
  std::vector<Condition> conditions = {Condition::kUngrounded, Condition::kGrounded};
  double temperature = 0.7;
  std::uint64_t seed = 1;
  // Sequences per task family per model, split evenly across conditions.
  int per_family_count = 12;
  int max_output = 1024;
  std::string critique_template = std::string(kDefaultCritiqueTemplate);
  std::string system_text = std::string(kDefaultSystemText);
  EmbedderSpec embedder;
  DetectorConfig detector;
  ForkSettings fork;
  ScriptedProviderConfig scripted;
  ProviderSettings providers;
  // Deterministic timestamps derived from the iteration index.
  bool logical_clock = false;

  void validate() const {
    if (models.empty()) throw ConfigError("at least one model is required");
    if (iterations < 2) throw ConfigError("iterations must be >= 2");
    if (grounding_iteration < 1 || grounding_iteration > iterations) {
      throw ConfigError("grounding_iteration must lie in [1, iterations]");
    }
    if (grounding_period < 0) throw ConfigError("grounding_period must be >= 0");
    if (conditions.empty()) throw ConfigError("at least one condition is required");
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
      throw ConfigError("temperature must lie in [0, 2]");
    }
    if (per_family_count < 1) throw ConfigError("per_family_count must be >= 1");
    if (per_family_count % static_cast<int>(conditions.size()) != 0) {
      throw ConfigError(
          "per_family_count must split evenly across the conditions");
    }
    if (max_output <= 0) throw ConfigError("max_output must be positive");
    if (critique_template.find(kPreviousPlaceholder) == std::string::npos) {
      throw ConfigError("critique_template lacks the {previous} placeholder");
    }
    embedder.validate();
    detector.validate();
    providers.validate();
    for (const auto& m : models) {
      if (m.vendor == Vendor::kScripted) {
        scripted.validate();
        break;
      }
    }
  }

  // Distinct tasks per family; each runs under every configured condition.
  int tasks_per_family() const {
    return per_family_count / static_cast<int>(conditions.size());
  }

  bool is_grounding_index(int n) const {
    if (n == grounding_iteration) return true;
    return grounding_period > 0 && n > grounding_iteration &&
           (n - grounding_iteration) % grounding_period == 0;
  }
};

struct IterationRecord {
  int index = 0;
  std::string prompt_used;
  IterationText text;
  // Runtime only; transcripts do not store embeddings.
  std::optional<EmbeddingVector> embedding;
  std::optional<MetricVector> metrics;
  bool grounded = false;
  std::vector<ComplianceFlag> compliance_flags;
  Correctness correctness = Correctness::kNotApplicable;
  std::string note;
  bool looping = false;
  bool forked = false;
  std::string timestamp;

  std::size_t length_chars() const { return text.char_length(); }
};

struct SequenceRecord {
  std::string sequence_id;
  TaskSpec task;
  Condition condition = Condition::kUngrounded;
  ProviderId model;
  std::vector<IterationRecord> iterations;
  std::string config_fingerprint;
  bool complete = false;
  std::string failure;

  // Delta_i for iterations 1..N (index 0 of the result is iteration 1).
  std::vector<double> delta_series() const {
    std::vector<double> out;
    for (const auto& it : iterations) {
      if (it.metrics) out.push_back(it.metrics->delta_i);
    }
    return out;
  }

  bool has_compliance_flags() const {
    for (const auto& it : iterations) {
      if (!it.compliance_flags.empty()) return true;
    }
    return false;
  }
};

inline std::string make_sequence_id(const ProviderId& model, const TaskSpec& task,
                                    Condition c) {
  return model.to_string() + "/" + task.task_id + "/" + to_string(c);
}

namespace detail {

struct CompliancePattern {
  ComplianceFlag flag;
  std::string_view needle;
};

inline const std::vector<CompliancePattern>& compliance_patterns() {
  static const std::vector<CompliancePattern> patterns = {
      {ComplianceFlag::kRefusal, "i can't help"},
      {ComplianceFlag::kRefusal, "i cannot help"},
      {ComplianceFlag::kRefusal, "i can't assist"},
      {ComplianceFlag::kRefusal, "i cannot assist"},
      {ComplianceFlag::kRefusal, "i'm unable to"},
      {ComplianceFlag::kRefusal, "i am unable to"},
      {ComplianceFlag::kRefusal, "i won't be able"},
      {ComplianceFlag::kRefusal, "i will not be able"},
      {ComplianceFlag::kRefusal, "i'm sorry, but i"},
      {ComplianceFlag::kRefusal, "i must decline"},
      {ComplianceFlag::kClarificationRequest, "could you clarify"},
      {ComplianceFlag::kClarificationRequest, "can you clarify"},
      {ComplianceFlag::kClarificationRequest, "please clarify"},
      {ComplianceFlag::kClarificationRequest, "could you specify"},
      {ComplianceFlag::kClarificationRequest, "what do you mean"},
      {ComplianceFlag::kClarificationRequest, "could you provide more"},
      {ComplianceFlag::kClarificationRequest, "please provide more"},
      {ComplianceFlag::kClarificationRequest, "do you want me to"},
      {ComplianceFlag::kClarificationRequest, "would you like me to"},
      {ComplianceFlag::kConstraintNote, "as instructed"},
      {ComplianceFlag::kConstraintNote, "without adding new information"},
      {ComplianceFlag::kConstraintNote, "no new information"},
      {ComplianceFlag::kConstraintNote, "i will not add"},
      {ComplianceFlag::kConstraintNote, "i have not added"},
      {ComplianceFlag::kConstraintNote, "per your instructions"},
      {ComplianceFlag::kConstraintNote, "without introducing new"},
      {ComplianceFlag::kConstraintNote, "the instruction to"},
      {ComplianceFlag::kOther, "no further improvements"},
      {ComplianceFlag::kOther, "no changes are needed"},
      {ComplianceFlag::kOther, "no changes were needed"},
      {ComplianceFlag::kOther, "i have made no changes"},
      {ComplianceFlag::kOther, "the answer is already"},
      {ComplianceFlag::kOther, "this answer is already"},
  };
  return patterns;
}

inline std::string normalize_apostrophes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.substr(i, 3) == "\xE2\x80\x99") {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace detail

// Pattern-based flags for refusals, clarification requests and commentary
// about the instruction. Empty means compliant. Each flag appears at most
// once, in enum order.
inline std::vector<ComplianceFlag> compliance_check(const IterationText& text) {
  const std::string t = detail::normalize_apostrophes(text.content());
  std::vector<ComplianceFlag> out;
  for (const auto& p : detail::compliance_patterns()) {
    if (std::find(out.begin(), out.end(), p.flag) != out.end()) continue;
    if (contains_case_insensitive(t, p.needle)) out.push_back(p.flag);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct CorrectnessResult {
  Correctness value = Correctness::kNotApplicable;
  std::string note;
};

inline CorrectnessResult correctness_eval(const TaskSpec& task,
                                          const IterationText& text) {
  if (task.family == TaskFamily::kExplanation ||
      task.family == TaskFamily::kReflection) {
    return {Correctness::kNotApplicable, {}};
  }
  if (const auto* a = std::get_if<ArithmeticTruth>(&task.ground_truth)) {
    const auto stated = extract_final_number(text.content());
    if (!stated) return {Correctness::kIncorrect, "extraction failed: no number"};
    return {rational_close(*stated, a->value) ? Correctness::kCorrect
                                              : Correctness::kIncorrect,
            {}};
  }
  if (const auto* c = std::get_if<CodeTruth>(&task.ground_truth)) {
    const auto claims = extract_code_claims(text.content(), c->function_name);
    for (const auto& ex : c->examples) {
      const auto it = claims.find(ex.input);
      if (it == claims.end()) {
        return {Correctness::kIncorrect,
                "extraction failed: no claim for " + c->function_name + "(" +
                    std::to_string(ex.input) + ")"};
      }
      if (it->second != ex.output) return {Correctness::kIncorrect, {}};
    }
    return {Correctness::kCorrect, {}};
  }
  return {Correctness::kIncorrect, "extraction failed: task has no ground truth"};
}

using TimestampFn = std::function<std::string(const SequenceRecord&, int index)>;

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline std::string logical_timestamp(int index) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "1970-01-01T00:%02d:%02d.000Z", index / 60,
                index % 60);
  return buf;
}

inline TimestampFn make_timestamp_fn(const RunConfig& cfg) {
  if (cfg.logical_clock) {
    return [](const SequenceRecord&, int index) { return logical_timestamp(index); };
  }
  return [](const SequenceRecord&, int) { return utc_now_iso8601(); };
}

// Metrics for the transition prev -> cur. history holds the 3-grams of all
// iterations before cur.
inline MetricVector compute_metrics(const IterationText& prev,
                                    const IterationText& cur,
                                    const EmbeddingVector& prev_embedding,
                                    const EmbeddingVector& cur_embedding,
                                    const NgramSet& history) {
  MetricVector m;
  m.delta_i = normalized_edit_distance(cur, prev);
  m.ngram_novelty = ngram_novelty(cur, history);
  m.embed_drift = embedding_drift(cur_embedding, prev_embedding);
  m.char_entropy = char_entropy(cur);
  m.length_chars = cur.char_length();
  return m;
}

// Runs one sequence. Provider failures mark the record incomplete and keep
// the iterations gathered so far.
inline SequenceRecord run_sequence(const TaskSpec& task, Condition condition,
                                   ChatProvider& provider, Embedder& embedder,
                                   const RunConfig& cfg,
                                   const std::string& config_fingerprint = {},
                                   const TimestampFn& timestamp = nullptr) {
  task.validate();
  SequenceRecord rec;
  rec.task = task;
  rec.condition = condition;
  rec.model = provider.id();
  rec.sequence_id = make_sequence_id(rec.model, task, condition);
  rec.config_fingerprint = config_fingerprint;
  const TimestampFn stamp = timestamp ? timestamp : make_timestamp_fn(cfg);

  NgramHistory history;
  MirrorLoopDetector detector(cfg.detector);
  std::optional<int> last_grounded;

  auto base_request = [&](int n) {
    ChatRequest req;
    req.system_text = cfg.system_text;
    req.temperature = cfg.temperature;
    req.max_output = cfg.max_output;
    req.seed = static_cast<std::int64_t>(
        derive_seed(cfg.seed, rec.sequence_id, {n}) >> 1);
    req.trace.task_id = task.task_id;
    req.trace.iteration = n;
    req.trace.last_grounded_iteration = last_grounded;
    return req;
  };

  auto finish_record = [&](IterationRecord& r) {
    r.compliance_flags = compliance_check(r.text);
    const auto c = correctness_eval(task, r.text);
    r.correctness = c.value;
    r.note = c.note;
    r.timestamp = stamp(rec, r.index);
  };

  try {
    {
      IterationRecord r;
      r.index = 0;
      r.prompt_used = task.initial_prompt;
      ChatRequest req = base_request(0);
      req.turns.push_back({Role::kUser, task.initial_prompt});
      r.text = provider.complete(req).text;
      r.embedding = embedder.embed(r.text);
      finish_record(r);
      history.add(r.text);
      rec.iterations.push_back(std::move(r));
    }
    for (int n = 1; n <= cfg.iterations; ++n) {
      const IterationRecord& prev = rec.iterations.back();
      IterationRecord r;
      r.index = n;
      r.grounded = condition == Condition::kGrounded && cfg.is_grounding_index(n);
      if (r.grounded) {
        last_grounded = n;
        r.prompt_used = inject_grounding(cfg.critique_template, prev.text,
                                         verify(task, prev.text));
      } else {
        r.prompt_used = compose_critique_prompt(cfg.critique_template, prev.text);
      }
      ChatRequest req = base_request(n);
      req.turns.push_back({Role::kUser, r.prompt_used});

      if (cfg.fork.enabled && detector.flagged_at()) {
        ForkContext ctx{req, *prev.embedding};
        ForkParams a{cfg.fork.temperature_a, {}, nullptr};
        ForkParams b{cfg.fork.temperature_b, {}, nullptr};
        try {
          ForkResult fr = state_fork(provider, embedder, ctx, a, b);
          r.text = std::move(fr.response.text);
          r.embedding = std::move(fr.embedding);
          r.forked = true;
        } catch (const ForkFailed&) {
          r.text = provider.complete(req).text;
          r.embedding = embedder.embed(r.text);
        }
      } else {
        r.text = provider.complete(req).text;
        r.embedding = embedder.embed(r.text);
      }
      r.metrics = compute_metrics(prev.text, r.text, *prev.embedding,
                                  *r.embedding, history.grams());
      history.add(r.text);
      r.looping = detector.observe(*r.metrics, n).looping;
      finish_record(r);
      rec.iterations.push_back(std::move(r));
    }
    rec.complete = true;
  } catch (const std::exception& e) {
    rec.complete = false;
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace mirrorloop
