// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal external verification and the state-forking mitigation.
//
// verify() never consults a language model: arithmetic is re-evaluated
// exactly, code claims are compared with stored examples, and explanation
// tasks are compared with a curated fact table.

#pragma once

#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirrorloop/answers.hpp"
#include "mirrorloop/embedder.hpp"
#include "mirrorloop/error.hpp"
#include "mirrorloop/expression.hpp"
#include "mirrorloop/provider.hpp"
#include "mirrorloop/tasks.hpp"

namespace mirrorloop {

enum class EvidenceKind { kCalculation, kFactualCheck, kExampleCheck };
enum class Verdict { kConfirms, kContradicts, kIndeterminate };

inline std::string to_string(EvidenceKind k) {
  switch (k) {
    case EvidenceKind::kCalculation: return "calculation";
    case EvidenceKind::kFactualCheck: return "factual_check";
    case EvidenceKind::kExampleCheck: return "example_check";
  }
  return "?";
}

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kConfirms: return "confirms";
    case Verdict::kContradicts: return "contradicts";
    case Verdict::kIndeterminate: return "indeterminate";
  }
  return "?";
}

struct GroundingEvidence {
  EvidenceKind kind = EvidenceKind::kFactualCheck;
  std::string content;
  Verdict verdict = Verdict::kIndeterminate;
};

// Answers within this distance of the exact value count as equal; covers
// rounded decimals in model output.
inline const Rational kDecimalTolerance(1, 1000000000);

inline bool rational_close(const Rational& a, const Rational& b) {
  try {
    return !(kDecimalTolerance < (a - b).abs());
  } catch (const ArithmeticOverflow&) {
    return false;
  }
}

inline std::string format_claim(const std::string& fn, std::int64_t in,
                                std::int64_t out) {
  return fn + "(" + std::to_string(in) + ") = " + std::to_string(out);
}

inline GroundingEvidence verify(const TaskSpec& task,
                                const IterationText& current_text) {
  const std::string& text = current_text.content();
  if (const auto* a = std::get_if<ArithmeticTruth>(&task.ground_truth)) {
    const Rational truth = evaluate_expression(a->expression);
    const auto stated = extract_final_number(text);
    GroundingEvidence ev{EvidenceKind::kCalculation, {}, Verdict::kContradicts};
    if (stated && rational_close(*stated, truth)) {
      ev.verdict = Verdict::kConfirms;
      ev.content = "Independent calculation gives " + truth.to_string() + ".";
    } else if (stated) {
      ev.content = "Independent calculation gives " + truth.to_string() +
                   ", not " + stated->to_string() + ".";
    } else {
      ev.content = "Independent calculation gives " + truth.to_string() +
                   "; the answer states no final result.";
    }
    return ev;
  }
  if (const auto* c = std::get_if<CodeTruth>(&task.ground_truth)) {
    const auto claims = extract_code_claims(text, c->function_name);
    std::vector<std::string> wrong;
    std::vector<std::string> right;
    for (const auto& ex : c->examples) {
      const auto it = claims.find(ex.input);
      const std::string expected = format_claim(c->function_name, ex.input, ex.output);
      if (it == claims.end()) {
        wrong.push_back(expected + " (no value stated)");
      } else if (it->second != ex.output) {
        wrong.push_back(expected + ", not " + std::to_string(it->second));
      } else {
        right.push_back(expected);
      }
    }
    GroundingEvidence ev{EvidenceKind::kExampleCheck, {}, Verdict::kConfirms};
    if (wrong.empty()) {
      ev.content = "Example check: ";
      for (std::size_t i = 0; i < right.size(); ++i) {
        ev.content += (i == 0 ? "" : "; ") + right[i];
      }
      ev.content += ". All stated values match.";
    } else {
      ev.verdict = Verdict::kContradicts;
      ev.content = "Example check: ";
      for (std::size_t i = 0; i < wrong.size(); ++i) {
        ev.content += (i == 0 ? "" : "; ") + wrong[i];
      }
      ev.content += ".";
    }
    return ev;
  }
  if (const auto* f = std::get_if<FactTruth>(&task.ground_truth)) {
    bool all = true;
    for (const auto& term : f->key_terms) {
      if (!contains_case_insensitive(text, term)) all = false;
    }
    return {EvidenceKind::kFactualCheck, "Reference check: " + f->fact,
            all ? Verdict::kConfirms : Verdict::kIndeterminate};
  }
  return {EvidenceKind::kFactualCheck,
          "Reference check: no external reference is available for this "
          "question.",
          Verdict::kIndeterminate};
}

inline constexpr std::string_view kPreviousPlaceholder = "{previous}";
inline constexpr std::string_view kEvidenceDelimiter = "[External verification]";
inline constexpr std::string_view kEvidenceInstruction =
    "Take this verification result into account when revising your answer.";

inline constexpr std::string_view kDefaultCritiqueTemplate =
    "Here is your previous answer:\n\n{previous}\n\nReview your answer and "
    "improve or correct it without adding new information. Reply with the "
    "complete revised answer only.";

inline constexpr std::string_view kDefaultSystemText =
    "You are a careful assistant. Answer the user's request directly.";

// Substitutes the prior output into the critique template.
inline std::string compose_critique_prompt(std::string_view critique_template,
                                           const IterationText& prior_text) {
  std::string out(critique_template);
  const auto at = out.find(kPreviousPlaceholder);
  if (at == std::string::npos) {
    throw ConfigError("critique template lacks the {previous} placeholder");
  }
  out.replace(at, kPreviousPlaceholder.size(), prior_text.content());
  return out;
}

// The critique prompt followed by the evidence under a fixed delimiter.
inline std::string inject_grounding(std::string_view critique_template,
                                    const IterationText& prior_text,
                                    const GroundingEvidence& ev) {
  if (ev.content.empty()) {
    throw PreconditionError("grounding evidence content must be nonempty");
  }
  std::string out = compose_critique_prompt(critique_template, prior_text);
  out += "\n\n";
  out += kEvidenceDelimiter;
  out += "\n";
  out += ev.content;
  out += "\n";
  out += kEvidenceInstruction;
  return out;
}

inline std::string inject_grounding(const IterationText& prior_text,
                                    const GroundingEvidence& ev) {
  return inject_grounding(kDefaultCritiqueTemplate, prior_text, ev);
}

// The evidence section of a grounded prompt, if any.
inline std::optional<std::string> extract_evidence(std::string_view prompt) {
  const auto at = prompt.rfind(kEvidenceDelimiter);
  if (at == std::string_view::npos) return std::nullopt;
  auto rest = prompt.substr(at + kEvidenceDelimiter.size());
  if (!rest.empty() && rest.front() == '\n') rest.remove_prefix(1);
  const auto end = rest.find('\n');
  return std::string(rest.substr(0, end));
}

struct ForkParams {
  double temperature = 0.7;
  std::string prompt_suffix;
  // Defaults to the provider passed to state_fork.
  ChatProvider* provider = nullptr;
};

struct ForkContext {
  ChatRequest request;
  EmbeddingVector last_embedding;
};

struct ForkResult {
  ChatResponse response;
  EmbeddingVector embedding;
  char branch = 'a';
  std::optional<double> drift_a;
  std::optional<double> drift_b;
};

class ForkFailed : public Error {
 public:
  using Error::Error;
};

// Index of the more divergent candidate; ties go to the first.
inline std::size_t select_more_divergent(double drift_a, double drift_b) {
  return drift_b > drift_a ? 1 : 0;
}

// Requests two continuations concurrently and keeps the one that drifts
// further from the last accepted output.
inline ForkResult state_fork(ChatProvider& provider, Embedder& embedder,
                             const ForkContext& context, const ForkParams& a,
                             const ForkParams& b) {
  struct Candidate {
    std::optional<ChatResponse> response;
    EmbeddingVector embedding;
    double drift = 0.0;
    std::string error;
  };
  auto run = [&](const ForkParams& p) {
    Candidate c;
    try {
      ChatRequest req = context.request;
      req.temperature = p.temperature;
      if (!p.prompt_suffix.empty()) req.turns.back().text += p.prompt_suffix;
      ChatProvider& target = p.provider != nullptr ? *p.provider : provider;
      c.response = target.complete(req);
    } catch (const std::exception& e) {
      c.error = e.what();
    }
    return c;
  };
  auto fa = std::async(std::launch::async, run, std::cref(a));
  Candidate cb = run(b);
  Candidate ca = fa.get();

  // Embedding happens on the calling thread; embedders need not be
  // thread-safe.
  for (Candidate* c : {&ca, &cb}) {
    if (!c->response) continue;
    c->embedding = embedder.embed(c->response->text);
    c->drift = embedding_drift(c->embedding, context.last_embedding);
  }
  if (!ca.response && !cb.response) {
    throw ForkFailed("both fork continuations failed: " + ca.error + " | " +
                     cb.error);
  }
  ForkResult out;
  if (ca.response) out.drift_a = ca.drift;
  if (cb.response) out.drift_b = cb.drift;
  const bool pick_b =
      !ca.response || (cb.response && select_more_divergent(ca.drift, cb.drift) == 1);
  Candidate& chosen = pick_b ? cb : ca;
  out.branch = pick_b ? 'b' : 'a';
  out.response = std::move(*chosen.response);
  out.embedding = std::move(chosen.embedding);
  return out;
}

}  // namespace mirrorloop
