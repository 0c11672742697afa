// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact evaluator for the arithmetic task language: decimal literals, the
// binary operators + - * / (also the typographic forms U+00D7, U+00F7 and
// U+2212), unary minus and parentheses, with the usual precedence.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mirrorloop/error.hpp"
#include "mirrorloop/rational.hpp"
#include "mirrorloop/utf8.hpp"

namespace mirrorloop {

// One binary operation in evaluation order, e.g. {17, '*', 24, 408}.
struct EvalStep {
  Rational lhs;
  char op = '+';
  Rational rhs;
  Rational result;
};

namespace detail {

class ExpressionParser {
 public:
  ExpressionParser(std::u32string_view src, std::vector<EvalStep>* trace)
      : src_(src), trace_(trace) {}

  Rational parse() {
    Rational v = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return v;
  }

 private:
  static char normalize_op(char32_t c) {
    switch (c) {
      case U'+': return '+';
      case U'-':
      case U'−': return '-';
      case U'*':
      case U'×': return '*';
      case U'/':
      case U'÷': return '/';
      default: return 0;
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw PreconditionError("expression: " + what + " at offset " +
                            std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           (src_[pos_] == U' ' || src_[pos_] == U'\t' || src_[pos_] == U'\n')) {
      ++pos_;
    }
  }

  char peek_op() {
    skip_ws();
    return pos_ < src_.size() ? normalize_op(src_[pos_]) : 0;
  }

  Rational apply(const Rational& a, char op, const Rational& b) {
    Rational r;
    switch (op) {
      case '+': r = a + b; break;
      case '-': r = a - b; break;
      case '*': r = a * b; break;
      default: r = a / b; break;
    }
    if (trace_ != nullptr) trace_->push_back({a, op, b, r});
    return r;
  }

  Rational expr() {
    Rational v = term();
    for (char op = peek_op(); op == '+' || op == '-'; op = peek_op()) {
      ++pos_;
      v = apply(v, op, term());
    }
    return v;
  }

  Rational term() {
    Rational v = unary();
    for (char op = peek_op(); op == '*' || op == '/'; op = peek_op()) {
      ++pos_;
      v = apply(v, op, unary());
    }
    return v;
  }

  Rational unary() {
    if (peek_op() == '-') {
      ++pos_;
      return -unary();
    }
    return primary();
  }

  Rational primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    if (src_[pos_] == U'(') {
      ++pos_;
      Rational v = expr();
      skip_ws();
      if (pos_ >= src_.size() || src_[pos_] != U')') fail("expected ')'");
      ++pos_;
      return v;
    }
    std::string literal;
    while (pos_ < src_.size() &&
           ((src_[pos_] >= U'0' && src_[pos_] <= U'9') || src_[pos_] == U'.')) {
      literal.push_back(static_cast<char>(src_[pos_]));
      ++pos_;
    }
    if (literal.empty()) fail("expected a number");
    auto r = Rational::parse_decimal(literal);
    if (!r) fail("bad number '" + literal + "'");
    return *r;
  }

  std::u32string_view src_;
  std::size_t pos_ = 0;
  std::vector<EvalStep>* trace_;
};

}  // namespace detail

inline Rational evaluate_expression(std::string_view expression,
                                    std::vector<EvalStep>* trace = nullptr) {
  const std::u32string src = utf8::decode(expression);
  return detail::ExpressionParser(src, trace).parse();
}

inline std::string op_symbol(char op) {
  switch (op) {
    case '+': return "+";
    case '-': return "−";
    case '*': return "×";
    default: return "÷";
  }
}

}  // namespace mirrorloop
