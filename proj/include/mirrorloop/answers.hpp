// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Extraction of checkable claims from free-form model answers.

#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mirrorloop/rational.hpp"

namespace mirrorloop {

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Sign at text[pos]: '-' or U+2212 (3 bytes). Returns its byte length or 0.
inline std::size_t minus_at(std::string_view text, std::size_t pos) {
  if (pos < text.size() && text[pos] == '-') return 1;
  if (text.substr(pos, 3) == "\xE2\x88\x92") return 3;
  return 0;
}

struct NumberToken {
  std::size_t begin = 0;
  std::size_t end = 0;
  Rational value;
};

// Scans standalone decimal numbers: optional sign, digits with optional
// thousands separators, optional fraction. Digits glued to letters
// ("x2", "3rd") are skipped.
inline std::vector<NumberToken> scan_numbers(std::string_view text) {
  std::vector<NumberToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (start > 0 && (is_word_char(text[start - 1]) || text[start - 1] == '.')) {
      while (i < text.size() && is_word_char(text[i])) ++i;
      continue;
    }
    std::string literal;
    while (i < text.size()) {
      if (is_digit(text[i])) {
        literal.push_back(text[i++]);
      } else if (text[i] == ',' && i + 3 < text.size() &&
                 is_digit(text[i + 1]) && is_digit(text[i + 2]) &&
                 is_digit(text[i + 3]) &&
                 (i + 4 >= text.size() || !is_digit(text[i + 4]))) {
        ++i;
      } else {
        break;
      }
    }
    if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
      literal.push_back(text[i++]);
      while (i < text.size() && is_digit(text[i])) literal.push_back(text[i++]);
    }
    if (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
      while (i < text.size() && is_word_char(text[i])) ++i;
      continue;
    }
    bool negative = false;
    if (start >= 1 && text[start - 1] == '-' &&
        (start < 2 || !is_word_char(text[start - 2]))) {
      negative = true;
      start -= 1;
    } else if (start >= 3 && minus_at(text, start - 3) == 3) {
      negative = true;
      start -= 3;
    }
    auto value = Rational::parse_decimal(literal);
    if (value) out.push_back({start, i, negative ? -*value : *value});
  }
  return out;
}

}  // namespace detail

// The last standalone number in the text, taken as the stated final answer.
inline std::optional<Rational> extract_final_number(std::string_view text) {
  auto nums = detail::scan_numbers(text);
  if (nums.empty()) return std::nullopt;
  return nums.back().value;
}

// Claims of the form name(x) = y, name(x) -> y, name(x) → y,
// name(x) is y, name(x) returns y. Later claims for the same input win.
inline std::map<std::int64_t, std::int64_t> extract_code_claims(
    std::string_view text, std::string_view function_name) {
  std::map<std::int64_t, std::int64_t> claims;
  const std::string head = std::string(function_name) + "(";
  std::size_t pos = 0;
  while ((pos = text.find(head, pos)) != std::string_view::npos) {
    const std::size_t after_name = pos + head.size();
    if (pos > 0 && detail::is_word_char(text[pos - 1])) {
      pos = after_name;
      continue;
    }
    std::size_t i = after_name;
    auto skip_ws = [&] {
      while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    };
    auto read_int = [&]() -> std::optional<std::int64_t> {
      skip_ws();
      bool neg = false;
      if (std::size_t m = detail::minus_at(text, i); m > 0) {
        neg = true;
        i += m;
      }
      std::string digits;
      while (i < text.size() &&
             (detail::is_digit(text[i]) ||
              (text[i] == ',' && i + 1 < text.size() &&
               detail::is_digit(text[i + 1]) && !digits.empty()))) {
        if (text[i] != ',') digits.push_back(text[i]);
        ++i;
      }
      if (digits.empty() || digits.size() > 18) return std::nullopt;
      const std::int64_t v = std::stoll(digits);
      return neg ? -v : v;
    };
    pos = after_name;
    auto arg = read_int();
    if (!arg) continue;
    skip_ws();
    if (i >= text.size() || text[i] != ')') continue;
    ++i;
    skip_ws();
    const std::string_view rest = text.substr(i);
    std::size_t sep = 0;
    for (std::string_view op : {"=", "->", "\xE2\x86\x92", "is ", "returns ",
                                "equals "}) {
      if (rest.substr(0, op.size()) == op) {
        sep = op.size();
        break;
      }
    }
    if (sep == 0) continue;
    i += sep;
    auto value = read_int();
    if (!value) continue;
    claims[*arg] = *value;
    pos = i;
  }
  return claims;
}

inline bool contains_case_insensitive(std::string_view haystack,
                                      std::string_view needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < needle.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(haystack[i + k])) !=
          std::tolower(static_cast<unsigned char>(needle[k]))) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace mirrorloop
