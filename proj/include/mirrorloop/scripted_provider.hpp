// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic offline provider that reproduces mirror-loop dynamics at the
// surface level. Iteration 0 emits a seeded canonical answer for the task.
// Each refinement n >= 1 rewrites a fraction f_n of the substitutable words
// with synonyms:
//
//   f_n = T * (a * exp(-lambda * (n - 1)) + eps * u_n
//              + [n >= g] * rho * exp(-lambda * (n - g)))
//
// clamped to [0, 1], where u_n is a seeded uniform draw in [-1, 1), g the
// latest grounded iteration, and T = temperature / 0.7. The grounding term
// raises the change at the grounded step by rho and decays at the same rate
// as the base change afterwards.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mirrorloop/answers.hpp"
#include "mirrorloop/error.hpp"
#include "mirrorloop/expression.hpp"
#include "mirrorloop/grounding.hpp"
#include "mirrorloop/provider.hpp"
#include "mirrorloop/rng.hpp"
#include "mirrorloop/tasks.hpp"

namespace mirrorloop {

using SynonymTable = std::map<std::string, std::vector<std::string>>;

// Groups of interchangeable words of equal length, so paraphrasing does not
// move the output length.
inline const std::vector<std::vector<std::string>>& default_synonym_groups() {
  static const std::vector<std::vector<std::string>> groups = {
      {"answer", "result", "output"},   {"clear", "plain", "lucid"},
      {"simple", "direct"},             {"important", "essential", "necessary"},
      {"careful", "precise"},           {"quickly", "rapidly", "swiftly"},
      {"shows", "tells"},               {"method", "manner", "scheme"},
      {"step", "part", "move"},         {"steps", "parts", "moves"},
      {"final", "total", "whole"},      {"value", "worth"},
      {"values", "totals"},             {"number", "figure", "amount"},
      {"check", "audit", "probe"},      {"verify", "assess", "review"},
      {"accurate", "faithful"},         {"problem", "concern", "subject"},
      {"idea", "view", "plan"},         {"ideas", "views", "plans"},
      {"explain", "clarify", "outline"}, {"understand", "comprehend"},
      {"reason", "ground", "motive"},   {"reasoning", "judgement"},
      {"process", "routine"},           {"large", "major", "broad"},
      {"small", "minor"},               {"useful", "usable"},
      {"example", "instance"},          {"start", "begin"},
      {"begins", "starts"},             {"makes", "forms"},
      {"keep", "hold"},                 {"applies", "employs"},
      {"point", "issue"},               {"main", "core"},
      {"central", "primary", "leading"}, {"general", "overall", "broader"},
      {"specific", "distinct", "concrete"}, {"together", "combined"},
      {"approach", "strategy"},         {"consider", "evaluate"},
      {"carefully", "precisely"},       {"confident", "convinced"},
      {"certain", "assured"},           {"doubt", "worry"},
      {"mistake", "blunder"},           {"errors", "faults"},
      {"error", "fault"},               {"improve", "enhance", "upgrade"},
      {"revise", "rework", "update"},   {"change", "adjust", "modify"},
      {"changes", "updates"},           {"statement", "assertion"},
      {"claims", "points"},             {"evidence", "findings"},
      {"handles", "manages"},           {"efficient", "effective"},
      {"quick", "rapid", "swift"},      {"people", "humans"},
      {"common", "normal"},             {"typical", "regular"},
      {"difficult", "demanding"},       {"notice", "detect", "remark"},
      {"recognize", "recognise"},       {"overview", "synopsis"},
      {"strong", "robust", "sturdy"},   {"weak", "poor"},
      {"complete", "thorough"},         {"partial", "limited"},
      {"relevant", "material"},         {"structure", "framework"},
      {"organized", "organised"},       {"think", "judge"},
      {"believe", "suppose", "presume"}, {"learn", "grasp"},
      {"words", "terms"},               {"sentence", "phrasing"},
      {"version", "variant", "edition"},
  };
  return groups;
}

inline SynonymTable synonym_table_from_groups(
    const std::vector<std::vector<std::string>>& groups) {
  SynonymTable table;
  for (const auto& g : groups) {
    for (const auto& w : g) {
      auto& alts = table[w];
      for (const auto& other : g) {
        if (other != w &&
            std::find(alts.begin(), alts.end(), other) == alts.end()) {
          alts.push_back(other);
        }
      }
    }
  }
  return table;
}

struct ScriptedProviderConfig {
  double decay_rate = 0.15970;     // lambda
  double base_change = 0.6;        // a
  double noise_amplitude = 0.01;   // eps
  double rebound_gain = 0.3344;    // rho
  std::uint64_t seed = 7;
  SynonymTable synonym_table = synonym_table_from_groups(default_synonym_groups());
  // Probability that a refinement opens with meta-commentary.
  double compliance_violation_rate = 0.0;
  // Probability that the canonical answer of a verifiable task is wrong.
  double initial_error_rate = 0.25;
  double reference_temperature = 0.7;

  void validate() const {
    if (!(decay_rate > 0.0)) throw ConfigError("decay_rate must be > 0");
    if (!(base_change > 0.0 && base_change <= 1.0)) {
      throw ConfigError("base_change must lie in (0, 1]");
    }
    if (!(noise_amplitude >= 0.0)) {
      throw ConfigError("noise_amplitude must be >= 0");
    }
    if (!(rebound_gain >= 0.0)) throw ConfigError("rebound_gain must be >= 0");
    if (!(base_change * std::exp(-decay_rate * 9.0) + noise_amplitude <
          base_change)) {
      throw ConfigError("scripted change does not decay over ten iterations");
    }
    if (!(compliance_violation_rate >= 0.0 && compliance_violation_rate <= 1.0) ||
        !(initial_error_rate >= 0.0 && initial_error_rate <= 1.0)) {
      throw ConfigError("scripted probabilities must lie in [0, 1]");
    }
    if (!(reference_temperature > 0.0)) {
      throw ConfigError("reference_temperature must be > 0");
    }
  }

  // Expected base change at refinement n (no noise, reference temperature).
  double expected_fraction(int n, std::optional<int> grounded_at = {}) const {
    double f = base_change * std::exp(-decay_rate * (n - 1));
    if (grounded_at && n >= *grounded_at) {
      f += rebound_gain * std::exp(-decay_rate * (n - *grounded_at));
    }
    return std::clamp(f, 0.0, 1.0);
  }

  // Expected early(1-2) to late(6-7) reduction in percent, ungrounded.
  double expected_reduction_pct() const {
    const double early = expected_fraction(1) + expected_fraction(2);
    const double late = expected_fraction(6) + expected_fraction(7);
    return (early - late) / early * 100.0;
  }

  // Expected change at iteration 4 relative to iteration 2, grounded at g.
  double expected_rebound_pct(int grounding_iteration) const {
    const double at2 = expected_fraction(2, grounding_iteration);
    const double at4 = expected_fraction(4, grounding_iteration);
    return (at4 - at2) / at2 * 100.0;
  }

  // Solves for decay_rate and rebound_gain that hit the requested
  // reduction and rebound percentages with grounding at g (g in 3..4).
  static ScriptedProviderConfig calibrated(double base_change,
                                           double target_reduction_pct,
                                           double target_rebound_pct,
                                           int grounding_iteration) {
    if (!(target_reduction_pct > 0.0 && target_reduction_pct < 100.0)) {
      throw ConfigError("target reduction must lie in (0, 100)");
    }
    if (grounding_iteration < 3 || grounding_iteration > 4) {
      throw ConfigError(
          "calibration needs grounding between iterations 2 and 4 (g = 3 or 4)");
    }
    ScriptedProviderConfig cfg;
    cfg.base_change = base_change;
    // late/early = exp(-5 lambda) for the ungrounded base curve.
    cfg.decay_rate = -std::log(1.0 - target_reduction_pct / 100.0) / 5.0;
    const double lambda = cfg.decay_rate;
    const double at2 = base_change * std::exp(-lambda);
    const double base4 = base_change * std::exp(-3.0 * lambda);
    const double wanted4 = at2 * (1.0 + target_rebound_pct / 100.0);
    cfg.rebound_gain = std::max(
        0.0, (wanted4 - base4) / std::exp(-lambda * (4 - grounding_iteration)));
    return cfg;
  }
};

namespace detail {

struct WordSpan {
  std::size_t begin;
  std::size_t end;
};

inline bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline std::vector<WordSpan> word_spans(std::string_view text) {
  std::vector<WordSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_ascii_alpha(text[i])) {
      ++i;
      continue;
    }
    const std::size_t b = i;
    while (i < text.size() && is_ascii_alpha(text[i])) ++i;
    out.push_back({b, i});
  }
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// "Word" keeps its capital; all-caps or mixed case is left alone.
inline std::optional<bool> capitalization(std::string_view w) {
  bool first_upper = std::isupper(static_cast<unsigned char>(w[0])) != 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (std::isupper(static_cast<unsigned char>(w[i])) != 0) return std::nullopt;
  }
  return first_upper;
}

inline const std::vector<std::string>& compliance_openers() {
  static const std::vector<std::string> openers = {
      "As instructed, I will not add new information, but here is a tidier "
      "version. ",
      "Could you clarify whether a shorter answer is preferred? Meanwhile, "
      "here is my revision. ",
      "No further improvements seem necessary, but here is the answer "
      "again. ",
  };
  return openers;
}

inline std::string strip_compliance_openers(std::string text) {
  for (const auto& o : compliance_openers()) {
    if (text.rfind(o, 0) == 0) return text.substr(o.size());
  }
  return text;
}

inline const std::vector<std::string>& arithmetic_fillers() {
  static const std::vector<std::string> s = {
      "It is important to keep each step clear and simple so the final value "
      "is quick to verify.",
      "A careful approach is to compute the products first and then handle "
      "the remaining steps in order.",
      "This method shows the specific order of operations that the problem "
      "requires.",
      "We can check the answer by working through the same steps a second "
      "time with a different approach.",
      "Keeping the structure of the calculation organized helps us notice "
      "any small error quickly.",
      "The central idea is that multiplication and division come before "
      "addition and subtraction.",
      "Each intermediate number is an essential part of the overall "
      "reasoning.",
      "Writing every step down is a simple method to avoid a common mistake.",
      "A quick review of the values suggests that the process is complete "
      "and accurate.",
      "The main point is to keep track of every intermediate value so the "
      "whole process stays clear.",
  };
  return s;
}

inline const std::vector<std::string>& code_fillers() {
  static const std::vector<std::string> s = {
      "The function is simple and handles each input in a direct and "
      "efficient manner.",
      "A careful implementation keeps the structure clear so that people can "
      "verify it quickly.",
      "The main idea is to apply the definition step by step without any "
      "hidden state.",
      "It is important to consider small inputs first, because they make a "
      "common mistake easy to notice.",
      "This approach is efficient for typical values and the reasoning "
      "stays clear.",
      "We can check each value by tracing the same steps by hand.",
      "Keeping the function pure makes the overall behaviour simple to "
      "understand and to review.",
      "A specific example helps to explain the general idea behind the "
      "method.",
      "The central point is that the same input always produces the same "
      "result.",
      "A quick check of the values below shows that the approach is "
      "accurate.",
  };
  return s;
}

inline const std::vector<std::string>& explanation_fillers() {
  static const std::vector<std::string> s = {
      "The main idea is simple, but it is important to explain each part in "
      "clear words.",
      "A common mistake is to treat this as a single step when it is really "
      "a process with several parts.",
      "A specific example can make the general point much easier to "
      "understand.",
      "People often find the central idea difficult at first, yet the "
      "structure is quite regular.",
      "It helps to consider the overall framework before looking at the "
      "small details.",
      "The reasoning behind it is strong and the evidence for it is "
      "complete enough for most purposes.",
      "This overview keeps the explanation accurate while staying simple.",
      "Each part plays an essential role, and together they form a "
      "coherent picture.",
      "A careful view of the process shows why it matters in typical "
      "situations.",
      "We can check this idea against everyday examples to see that it "
      "holds.",
  };
  return s;
}

inline const std::vector<std::string>& reflection_fillers() {
  static const std::vector<std::string> s = {
      "I think the central point is to be careful about the reason behind "
      "each statement.",
      "A clear answer is not always a correct one, so I try to check my "
      "reasoning against the evidence.",
      "It is important to notice when my confidence is larger than the "
      "evidence allows.",
      "One useful approach is to consider how a careful reader would "
      "assess each claim.",
      "I believe that a simple structure makes it easier to recognize a "
      "mistake.",
      "Doubt is useful because it makes me revise an idea before I treat it "
      "as certain.",
      "The main problem is that rewording a sentence can look like progress "
      "without any real change.",
      "A specific example helps me judge whether my general view is "
      "accurate.",
      "I try to keep my claims limited to what I can verify.",
      "In the overall process, each revision should have a clear reason and "
      "a concrete purpose.",
  };
  return s;
}

inline std::string capitalize_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Draws `count` distinct fillers and joins them with spaces.
inline std::string pick_fillers(Rng& rng, const std::vector<std::string>& bank,
                                std::size_t count) {
  std::vector<std::size_t> idx(bank.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  std::string out;
  for (std::size_t i = 0; i < std::min(count, idx.size()); ++i) {
    if (!out.empty()) out += ' ';
    out += bank[idx[i]];
  }
  return out;
}

inline Rational perturb(const Rational& v, Rng& rng) {
  static const std::vector<std::int64_t> deltas = {-10, -2, -1, 1, 2, 10};
  return v + Rational(rng.pick(deltas));
}

}  // namespace detail

// Canonical iteration-0 answer for a task.
inline std::string scripted_initial_answer(const ScriptedProviderConfig& cfg,
                                           const TaskSpec& task) {
  Rng rng(derive_seed(cfg.seed, "scripted/initial/" + task.task_id));
  const bool wrong = task.verifiable && rng.chance(cfg.initial_error_rate);
  std::string out;
  switch (task.family) {
    case TaskFamily::kArithmetic: {
      const auto& truth = std::get<ArithmeticTruth>(task.ground_truth);
      std::vector<EvalStep> steps;
      const Rational value = evaluate_expression(truth.expression, &steps);
      out = "Let me work through this problem step by step. ";
      out += detail::pick_fillers(rng, detail::arithmetic_fillers(), 2);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        out += i == 0 ? " First, we compute " : " Next, we compute ";
        out += s.lhs.to_string() + " " + op_symbol(s.op) + " " +
               s.rhs.to_string() + " = " + s.result.to_string() + ".";
      }
      out += " " + detail::pick_fillers(rng, detail::arithmetic_fillers(), 3);
      const Rational stated = wrong ? detail::perturb(value, rng) : value;
      out += " Therefore, the final answer is " + stated.to_string() + ".";
      break;
    }
    case TaskFamily::kCode: {
      const auto& truth = std::get<CodeTruth>(task.ground_truth);
      const CodeFunction* fn = find_code_function(truth.function_name);
      out = "Here is a simple approach to " + truth.function_name + ". ";
      if (fn != nullptr) {
        out += "The function " + fn->signature + " " + fn->description +
               ", using a direct loop or formula. ";
      }
      out += detail::pick_fillers(rng, detail::code_fillers(), 3);
      out += " For the requested inputs: ";
      const std::size_t bad =
          wrong ? static_cast<std::size_t>(rng.below(truth.examples.size()))
                : truth.examples.size();
      for (std::size_t i = 0; i < truth.examples.size(); ++i) {
        const auto& ex = truth.examples[i];
        const std::int64_t claimed = i == bad ? ex.output + 1 : ex.output;
        out += format_claim(truth.function_name, ex.input, claimed);
        out += i + 1 < truth.examples.size() ? "; " : ". ";
      }
      out += detail::pick_fillers(rng, detail::code_fillers(), 2);
      break;
    }
    case TaskFamily::kExplanation: {
      const auto* fact = std::get_if<FactTruth>(&task.ground_truth);
      out = "Here is a clear overview of the subject. ";
      if (fact != nullptr && rng.chance(0.75)) out += fact->fact + " ";
      out += detail::pick_fillers(rng, detail::explanation_fillers(), 5);
      break;
    }
    case TaskFamily::kReflection: {
      out = "This is a difficult question, so I will explain my view "
            "carefully. ";
      out += detail::pick_fillers(rng, detail::reflection_fillers(), 5);
      break;
    }
  }
  return out;
}

// Applies a verifier's corrections to the text: a "gives X" calculation
// replaces the final number, "name(x) = y" example checks replace claims.
inline std::string apply_evidence(const TaskSpec& task, std::string text,
                                  std::string_view evidence) {
  if (std::holds_alternative<ArithmeticTruth>(task.ground_truth)) {
    const auto at = evidence.find("gives ");
    if (at == std::string_view::npos) return text;
    const auto nums = detail::scan_numbers(evidence.substr(at + 6));
    const auto in_text = detail::scan_numbers(text);
    if (nums.empty() || in_text.empty()) return text;
    const auto& last = in_text.back();
    text.replace(last.begin, last.end - last.begin, nums.front().value.to_string());
    return text;
  }
  if (const auto* c = std::get_if<CodeTruth>(&task.ground_truth)) {
    for (const auto& [in, out] : extract_code_claims(evidence, c->function_name)) {
      const std::string head = c->function_name + "(" + std::to_string(in) + ") = ";
      const auto at = text.find(head);
      if (at == std::string::npos) continue;
      std::size_t end = at + head.size();
      if (end < text.size() && text[end] == '-') ++end;
      while (end < text.size() && detail::is_digit(text[end])) ++end;
      text.replace(at + head.size(), end - at - head.size(), std::to_string(out));
    }
  }
  return text;
}

struct ScriptedStep {
  int iteration = 1;
  std::optional<int> last_grounded_iteration;
  double temperature = 0.7;
  // Evidence text injected at this step, if any.
  std::optional<std::string> evidence;
};

// Change fraction f_n for a step, noise draw u in [-1, 1).
inline double change_fraction(const ScriptedProviderConfig& cfg,
                              const ScriptedStep& step, double u) {
  const int n = step.iteration;
  double f = cfg.base_change * std::exp(-cfg.decay_rate * (n - 1)) +
             cfg.noise_amplitude * u;
  if (step.last_grounded_iteration && n >= *step.last_grounded_iteration) {
    f += cfg.rebound_gain *
         std::exp(-cfg.decay_rate * (n - *step.last_grounded_iteration));
  }
  f *= step.temperature / cfg.reference_temperature;
  return std::clamp(f, 0.0, 1.0);
}

// One refinement of prior_text. Pure in (cfg, task, step, prior_text).
inline std::string scripted_complete(const ScriptedProviderConfig& cfg,
                                     const TaskSpec& task,
                                     const ScriptedStep& step,
                                     const IterationText& prior_text) {
  if (step.iteration < 1) throw PreconditionError("scripted step iteration must be >= 1");
  const auto temp_bits = static_cast<std::int64_t>(
      std::llround(step.temperature * 1000.0));
  Rng rng(derive_seed(cfg.seed, "scripted/step/" + task.task_id,
                      {step.iteration, temp_bits}));
  const double u = rng.uniform() * 2.0 - 1.0;
  const double f = change_fraction(cfg, step, u);

  std::string text = detail::strip_compliance_openers(prior_text.content());
  const bool grounded_now = step.last_grounded_iteration &&
                            *step.last_grounded_iteration == step.iteration;
  if (grounded_now && step.evidence) text = apply_evidence(task, text, *step.evidence);

  const auto spans = detail::word_spans(text);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::string_view w(text.data() + spans[i].begin,
                             spans[i].end - spans[i].begin);
    if (!detail::capitalization(w)) continue;
    if (cfg.synonym_table.contains(detail::to_lower(w))) candidates.push_back(i);
  }
  const auto k = static_cast<std::size_t>(
      std::llround(f * static_cast<double>(candidates.size())));
  rng.shuffle(candidates);
  candidates.resize(std::min(k, candidates.size()));
  std::sort(candidates.begin(), candidates.end());

  std::string out;
  out.reserve(text.size() + 16);
  std::size_t cursor = 0;
  for (std::size_t idx : candidates) {
    const auto& span = spans[idx];
    const std::string_view w(text.data() + span.begin, span.end - span.begin);
    const auto& alts = cfg.synonym_table.at(detail::to_lower(w));
    if (alts.empty()) continue;
    std::string replacement = rng.pick(alts);
    if (*detail::capitalization(w)) replacement = detail::capitalize_first(replacement);
    out.append(text, cursor, span.begin - cursor);
    out += replacement;
    cursor = span.end;
  }
  out.append(text, cursor, std::string::npos);

  if (cfg.compliance_violation_rate > 0.0 &&
      rng.chance(cfg.compliance_violation_rate)) {
    out = rng.pick(detail::compliance_openers()) + out;
  }
  return out;
}

class ScriptedProvider final : public ChatProvider {
 public:
  ScriptedProvider(ScriptedProviderConfig cfg, const std::vector<TaskSpec>& tasks,
                   std::string critique_template =
                       std::string(kDefaultCritiqueTemplate),
                   std::string model = "default")
      : cfg_(std::move(cfg)),
        critique_template_(std::move(critique_template)),
        model_(std::move(model)) {
    cfg_.validate();
    for (const auto& t : tasks) tasks_.emplace(t.task_id, t);
    const auto at = critique_template_.find(kPreviousPlaceholder);
    if (at == std::string::npos) {
      throw ConfigError("critique template lacks the {previous} placeholder");
    }
    prefix_ = critique_template_.substr(0, at);
    suffix_ = critique_template_.substr(at + kPreviousPlaceholder.size());
  }

  ProviderId id() const override { return {Vendor::kScripted, model_}; }
  const ScriptedProviderConfig& config() const { return cfg_; }

  ChatResponse complete(const ChatRequest& request) override {
    request.validate();
    const auto it = tasks_.find(request.trace.task_id);
    if (it == tasks_.end()) {
      throw PreconditionError("scripted provider: unknown task '" +
                              request.trace.task_id + "'");
    }
    const TaskSpec& task = it->second;
    ChatResponse resp;
    resp.provider_id = id().to_string();
    resp.raw_status = 200;
    if (request.trace.iteration == 0) {
      resp.text = IterationText(scripted_initial_answer(cfg_, task));
      return resp;
    }
    const std::string& prompt = request.turns.back().text;
    ScriptedStep step;
    step.iteration = request.trace.iteration;
    step.last_grounded_iteration = request.trace.last_grounded_iteration;
    step.temperature = request.temperature;
    if (step.last_grounded_iteration &&
        *step.last_grounded_iteration == step.iteration) {
      step.evidence = extract_evidence(prompt);
    }
    resp.text = IterationText(
        scripted_complete(cfg_, task, step, IterationText(prior_from_prompt(prompt))));
    return resp;
  }

 private:
  std::string prior_from_prompt(const std::string& prompt) const {
    if (prompt.rfind(prefix_, 0) != 0) {
      throw PreconditionError("scripted provider: prompt does not follow the "
                              "critique template");
    }
    std::size_t end = prompt.size();
    if (const auto ev = prompt.rfind(std::string("\n\n") + std::string(kEvidenceDelimiter));
        ev != std::string::npos) {
      end = ev;
    }
    const auto suf = suffix_.empty() ? end : prompt.rfind(suffix_, end);
    if (suf == std::string::npos || suf < prefix_.size()) {
      throw PreconditionError("scripted provider: prompt does not follow the "
                              "critique template");
    }
    return prompt.substr(prefix_.size(), suf - prefix_.size());
  }

  ScriptedProviderConfig cfg_;
  std::unordered_map<std::string, TaskSpec> tasks_;
  std::string critique_template_;
  std::string prefix_;
  std::string suffix_;
  std::string model_;
};

}  // namespace mirrorloop
