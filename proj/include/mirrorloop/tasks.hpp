// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Task families and the deterministic task bank.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mirrorloop/error.hpp"
#include "mirrorloop/expression.hpp"
#include "mirrorloop/rational.hpp"
#include "mirrorloop/rng.hpp"

namespace mirrorloop {

enum class TaskFamily { kArithmetic, kCode, kExplanation, kReflection };

inline constexpr std::array<TaskFamily, 4> kAllFamilies = {
    TaskFamily::kArithmetic, TaskFamily::kCode, TaskFamily::kExplanation,
    TaskFamily::kReflection};

inline std::string to_string(TaskFamily f) {
  switch (f) {
    case TaskFamily::kArithmetic: return "arithmetic";
    case TaskFamily::kCode: return "code";
    case TaskFamily::kExplanation: return "explanation";
    case TaskFamily::kReflection: return "reflection";
  }
  return "?";
}

inline TaskFamily parse_family(std::string_view s) {
  for (TaskFamily f : kAllFamilies) {
    if (to_string(f) == s) return f;
  }
  throw ParseError(0, "unknown task family '" + std::string(s) + "'");
}

struct ArithmeticTruth {
  std::string expression;
  Rational value;
  friend bool operator==(const ArithmeticTruth&, const ArithmeticTruth&) = default;
};

struct CodeExample {
  std::int64_t input = 0;
  std::int64_t output = 0;
  friend bool operator==(const CodeExample&, const CodeExample&) = default;
};

struct CodeTruth {
  std::string function_name;
  std::vector<CodeExample> examples;
  friend bool operator==(const CodeTruth&, const CodeTruth&) = default;
};

// Curated reference fact for explanation tasks. key_terms must all appear
// (case-insensitively) in an answer for the fact to count as confirmed.
struct FactTruth {
  std::string fact;
  std::vector<std::string> key_terms;
  friend bool operator==(const FactTruth&, const FactTruth&) = default;
};

using GroundTruth =
    std::variant<std::monostate, ArithmeticTruth, CodeTruth, FactTruth>;

struct TaskSpec {
  TaskFamily family = TaskFamily::kArithmetic;
  std::string task_id;
  std::string initial_prompt;
  bool verifiable = false;
  GroundTruth ground_truth;

  void validate() const {
    if (task_id.empty()) throw PreconditionError("task_id must be nonempty");
    if (verifiable && std::holds_alternative<std::monostate>(ground_truth)) {
      throw PreconditionError("verifiable task " + task_id +
                              " has no ground truth");
    }
  }

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Pure integer functions used by code tasks.
struct CodeFunction {
  std::string name;
  std::string signature;
  std::string description;
  std::int64_t min_input;
  std::int64_t max_input;
  std::function<std::int64_t(std::int64_t)> eval;
};

inline const std::vector<CodeFunction>& code_function_catalogue() {
  static const std::vector<CodeFunction> catalogue = {
      {"square", "square(n)", "returns n multiplied by itself", 2, 40,
       [](std::int64_t n) { return n * n; }},
      {"cube", "cube(n)", "returns n raised to the third power", 2, 15,
       [](std::int64_t n) { return n * n * n; }},
      {"triangular", "triangular(n)",
       "returns the sum of the integers from 1 to n", 3, 60,
       [](std::int64_t n) { return n * (n + 1) / 2; }},
      {"factorial", "factorial(n)",
       "returns the product of the integers from 1 to n", 2, 10,
       [](std::int64_t n) {
         std::int64_t r = 1;
         for (std::int64_t k = 2; k <= n; ++k) r *= k;
         return r;
       }},
      {"fibonacci", "fibonacci(n)",
       "returns the n-th Fibonacci number with fibonacci(0) = 0 and "
       "fibonacci(1) = 1",
       3, 30,
       [](std::int64_t n) {
         std::int64_t a = 0, b = 1;
         for (std::int64_t k = 0; k < n; ++k) {
           const std::int64_t t = a + b;
           a = b;
           b = t;
         }
         return a;
       }},
      {"digit_sum", "digit_sum(n)", "returns the sum of the decimal digits of n",
       100, 99999,
       [](std::int64_t n) {
         std::int64_t s = 0;
         for (; n > 0; n /= 10) s += n % 10;
         return s;
       }},
      {"collatz_steps", "collatz_steps(n)",
       "returns how many Collatz steps it takes for n to reach 1", 2, 40,
       [](std::int64_t n) {
         std::int64_t steps = 0;
         while (n != 1) {
           n = n % 2 == 0 ? n / 2 : 3 * n + 1;
           ++steps;
         }
         return steps;
       }},
      {"count_divisors", "count_divisors(n)",
       "returns the number of positive divisors of n", 2, 120,
       [](std::int64_t n) {
         std::int64_t c = 0;
         for (std::int64_t d = 1; d <= n; ++d) c += n % d == 0 ? 1 : 0;
         return c;
       }},
      {"reverse_digits", "reverse_digits(n)",
       "returns the integer formed by reversing the decimal digits of n", 10,
       9999,
       [](std::int64_t n) {
         std::int64_t r = 0;
         for (; n > 0; n /= 10) r = r * 10 + n % 10;
         return r;
       }},
      {"double_plus_one", "double_plus_one(n)", "returns two times n plus one",
       1, 500, [](std::int64_t n) { return 2 * n + 1; }},
  };
  return catalogue;
}

inline const CodeFunction* find_code_function(std::string_view name) {
  for (const auto& f : code_function_catalogue()) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

struct ConceptEntry {
  std::string topic;
  std::string fact;
  std::vector<std::string> key_terms;
};

inline const std::vector<ConceptEntry>& concept_table() {
  static const std::vector<ConceptEntry> table = {
      {"photosynthesis",
       "Photosynthesis converts light energy into chemical energy stored in "
       "glucose, releasing oxygen.",
       {"light", "glucose"}},
      {"the greenhouse effect",
       "Greenhouse gases absorb infrared radiation emitted by the surface and "
       "re-emit part of it back downward.",
       {"infrared"}},
      {"how vaccines work",
       "Vaccines expose the immune system to an antigen so it forms memory "
       "cells without causing the disease.",
       {"immune", "memory"}},
      {"inflation",
       "Inflation is a sustained rise in the general price level that reduces "
       "the purchasing power of money.",
       {"price", "purchasing power"}},
      {"plate tectonics",
       "The lithosphere is divided into plates that move over the "
       "asthenosphere, causing earthquakes at their boundaries.",
       {"plates", "boundaries"}},
      {"binary search",
       "Binary search halves a sorted search interval at each step, taking "
       "logarithmic time.",
       {"sorted", "logarithmic"}},
      {"public-key cryptography",
       "Public-key cryptography uses a public key for encryption and a "
       "separate private key for decryption.",
       {"public key", "private key"}},
      {"natural selection",
       "Natural selection favors heritable traits that increase reproductive "
       "success in a given environment.",
       {"heritable", "reproductive"}},
      {"the water cycle",
       "Water evaporates, condenses into clouds and returns as precipitation.",
       {"evaporat", "precipitation"}},
      {"compound interest",
       "Compound interest is earned on both the principal and previously "
       "accumulated interest.",
       {"principal", "interest"}},
      {"how a refrigerator cools",
       "A refrigerator moves heat out of its interior by evaporating and "
       "compressing a refrigerant.",
       {"refrigerant", "heat"}},
      {"supply and demand",
       "Market prices tend toward the level where the quantity supplied equals "
       "the quantity demanded.",
       {"quantity", "price"}},
      {"the immune response to infection",
       "White blood cells identify pathogens and antibodies bind to their "
       "antigens.",
       {"antibodies", "pathogen"}},
      {"hash tables",
       "A hash table maps keys to buckets with a hash function, giving "
       "expected constant-time lookups.",
       {"hash function", "constant"}},
      {"the seasons on Earth",
       "Seasons arise from the tilt of Earth's axis relative to its orbital "
       "plane, not from changes in distance to the Sun.",
       {"tilt", "axis"}},
      {"entropy in thermodynamics",
       "The entropy of an isolated system never decreases over time.",
       {"isolated", "never decreases"}},
  };
  return table;
}

inline const std::vector<std::string>& reflection_prompts() {
  static const std::vector<std::string> prompts = {
      "Reflect on how you decide when an answer you have given is good "
      "enough.",
      "Describe how you would recognize that your own reasoning has gone "
      "wrong.",
      "Consider what it means for you to be confident in a claim, and explain "
      "your view.",
      "Reflect on the limits of checking your own work without outside "
      "information.",
      "Explain how you weigh simplicity against completeness when you answer "
      "a question.",
      "Reflect on whether rewording an argument can make it more correct.",
      "Describe how you would judge whether a revision of your answer is an "
      "improvement.",
      "Consider how your earlier statements constrain what you say next, and "
      "reflect on it.",
      "Reflect on the difference between sounding careful and being careful.",
      "Explain how you handle a question where you are unsure of the facts.",
      "Reflect on what you would need in order to change your mind about an "
      "answer.",
      "Describe the role that doubt plays in your reasoning process.",
      "Reflect on whether repeating a conclusion makes it more reliable.",
      "Consider how you would explain your reasoning to a skeptical reader.",
      "Reflect on the ways a fluent answer can still be mistaken.",
      "Describe what progress looks like when you think about a hard problem.",
  };
  return prompts;
}

namespace detail {

inline std::string arithmetic_expression(Rng& rng) {
  auto n = [&](std::int64_t lo, std::int64_t hi) {
    return std::to_string(rng.range(lo, hi));
  };
  static const std::vector<std::int64_t> terminating = {2, 4, 5, 8};
  switch (rng.below(6)) {
    case 0:
      return n(12, 39) + " × " + n(11, 29) + " − " + n(3, 99);
    case 1:
      return "(" + n(10, 99) + " + " + n(10, 99) + ") × " + n(3, 19);
    case 2:
      return n(6, 25) + " × " + n(6, 25) + " + " + n(3, 15) + " × " + n(3, 15);
    case 3: {
      const std::int64_t b = rng.range(10, 60);
      const std::int64_t a = b + rng.range(5, 90);
      return "(" + std::to_string(a) + " − " + std::to_string(b) + ") ÷ " +
             std::to_string(rng.pick(terminating));
    }
    case 4:
      return n(2, 9) + "." + std::to_string(rng.pick(std::vector<std::int64_t>{
                                 25, 5, 75, 2})) +
             " × " + n(4, 16) + " + " + n(10, 60);
    default:
      return n(30, 200) + " ÷ " +
             std::to_string(rng.pick(terminating)) + " + " + n(3, 12) +
             " × " + n(3, 12);
  }
}

inline std::string two_digit(std::size_t i) {
  return (i < 10 ? "0" : "") + std::to_string(i);
}

}  // namespace detail

// Deterministic bank of per_family tasks for each of the four families.
inline std::vector<TaskSpec> build_task_bank(std::uint64_t seed,
                                             std::size_t per_family) {
  if (per_family < 1) throw PreconditionError("per_family must be >= 1");
  std::vector<TaskSpec> bank;
  bank.reserve(per_family * kAllFamilies.size());

  Rng arith(derive_seed(seed, "bank/arithmetic"));
  for (std::size_t i = 1; i <= per_family; ++i) {
    std::string expr = detail::arithmetic_expression(arith);
    TaskSpec t;
    t.family = TaskFamily::kArithmetic;
    t.task_id = "arithmetic-" + detail::two_digit(i);
    t.initial_prompt = "Compute " + expr +
                       ". Show your working step by step and state the final "
                       "result.";
    t.verifiable = true;
    t.ground_truth = ArithmeticTruth{expr, evaluate_expression(expr)};
    bank.push_back(std::move(t));
  }

  Rng code(derive_seed(seed, "bank/code"));
  const auto& fns = code_function_catalogue();
  std::vector<std::size_t> order(fns.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  code.shuffle(order);
  for (std::size_t i = 1; i <= per_family; ++i) {
    const CodeFunction& fn = fns[order[(i - 1) % order.size()]];
    std::vector<std::int64_t> inputs;
    while (inputs.size() < 3) {
      const std::int64_t x = code.range(fn.min_input, fn.max_input);
      if (std::find(inputs.begin(), inputs.end(), x) == inputs.end()) {
        inputs.push_back(x);
      }
    }
    std::sort(inputs.begin(), inputs.end());
    CodeTruth truth{fn.name, {}};
    for (std::int64_t x : inputs) truth.examples.push_back({x, fn.eval(x)});
    TaskSpec t;
    t.family = TaskFamily::kCode;
    t.task_id = "code-" + detail::two_digit(i);
    t.initial_prompt = "Write a pure function " + fn.signature + " that " +
                       fn.description + ". Then state the exact values of " +
                       fn.name + "(" + std::to_string(inputs[0]) + "), " +
                       fn.name + "(" + std::to_string(inputs[1]) + ") and " +
                       fn.name + "(" + std::to_string(inputs[2]) + ").";
    t.verifiable = true;
    t.ground_truth = std::move(truth);
    bank.push_back(std::move(t));
  }

  static const std::vector<std::string> explain_styles = {
      "Explain {} clearly and accurately for a curious non-specialist.",
      "Give a short, accurate explanation of {} for a first-year student.",
  };
  Rng expl(derive_seed(seed, "bank/explanation"));
  const auto& concepts = concept_table();
  std::vector<std::size_t> corder(concepts.size());
  for (std::size_t k = 0; k < corder.size(); ++k) corder[k] = k;
  expl.shuffle(corder);
  for (std::size_t i = 1; i <= per_family; ++i) {
    const std::size_t round = (i - 1) / corder.size();
    const ConceptEntry& c = concepts[corder[(i - 1) % corder.size()]];
    std::string prompt = explain_styles[round % explain_styles.size()];
    prompt.replace(prompt.find("{}"), 2, c.topic);
    TaskSpec t;
    t.family = TaskFamily::kExplanation;
    t.task_id = "explanation-" + detail::two_digit(i);
    t.initial_prompt = std::move(prompt);
    t.verifiable = false;
    t.ground_truth = FactTruth{c.fact, c.key_terms};
    bank.push_back(std::move(t));
  }

  Rng refl(derive_seed(seed, "bank/reflection"));
  std::vector<std::string> rprompts = reflection_prompts();
  refl.shuffle(rprompts);
  for (std::size_t i = 1; i <= per_family; ++i) {
    const std::size_t round = (i - 1) / rprompts.size();
    std::string prompt = rprompts[(i - 1) % rprompts.size()];
    if (round > 0) prompt += " Answer in your own words.";
    TaskSpec t;
    t.family = TaskFamily::kReflection;
    t.task_id = "reflection-" + detail::two_digit(i);
    t.initial_prompt = std::move(prompt);
    t.verifiable = false;
    bank.push_back(std::move(t));
  }
  return bank;
}

// JSON mapping used in transcripts.
inline nlohmann::json task_to_json(const TaskSpec& t) {
  nlohmann::json j{{"family", to_string(t.family)},
                   {"task_id", t.task_id},
                   {"initial_prompt", t.initial_prompt},
                   {"verifiable", t.verifiable}};
  std::visit(
      [&](const auto& truth) {
        using T = std::decay_t<decltype(truth)>;
        if constexpr (std::is_same_v<T, ArithmeticTruth>) {
          j["ground_truth"] = {{"kind", "arithmetic"},
                               {"expression", truth.expression},
                               {"value_num", truth.value.num()},
                               {"value_den", truth.value.den()}};
        } else if constexpr (std::is_same_v<T, CodeTruth>) {
          nlohmann::json ex = nlohmann::json::array();
          for (const auto& e : truth.examples) ex.push_back({e.input, e.output});
          j["ground_truth"] = {{"kind", "code"},
                               {"function", truth.function_name},
                               {"examples", ex}};
        } else if constexpr (std::is_same_v<T, FactTruth>) {
          j["ground_truth"] = {{"kind", "fact"},
                               {"fact", truth.fact},
                               {"key_terms", truth.key_terms}};
        } else {
          j["ground_truth"] = nullptr;
        }
      },
      t.ground_truth);
  return j;
}

inline TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  t.family = parse_family(j.at("family").get<std::string>());
  t.task_id = j.at("task_id").get<std::string>();
  t.initial_prompt = j.at("initial_prompt").get<std::string>();
  t.verifiable = j.at("verifiable").get<bool>();
  const auto& g = j.at("ground_truth");
  if (!g.is_null()) {
    const auto kind = g.at("kind").get<std::string>();
    if (kind == "arithmetic") {
      t.ground_truth = ArithmeticTruth{
          g.at("expression").get<std::string>(),
          Rational(g.at("value_num").get<std::int64_t>(),
                   g.at("value_den").get<std::int64_t>())};
    } else if (kind == "code") {
      CodeTruth c{g.at("function").get<std::string>(), {}};
      for (const auto& e : g.at("examples")) {
        c.examples.push_back({e.at(0).get<std::int64_t>(),
                              e.at(1).get<std::int64_t>()});
      }
      t.ground_truth = std::move(c);
    } else if (kind == "fact") {
      t.ground_truth =
          FactTruth{g.at("fact").get<std::string>(),
                    g.at("key_terms").get<std::vector<std::string>>()};
    } else {
      throw ParseError(0, "unknown ground_truth kind '" + kind + "'");
    }
  }
  return t;
}

}  // namespace mirrorloop
