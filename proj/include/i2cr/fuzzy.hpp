// Copyright 2026 The I2CR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Fuzzy string similarity on a 0..100 scale. All ratios operate on the
// normalized form (ASCII case-fold, whitespace collapsed and trimmed,
// punctuation kept) and measure distance in Unicode code points.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "i2cr/text.hpp"

namespace i2cr {

class LexicalScore {
 public:
  constexpr LexicalScore() = default;
  constexpr explicit LexicalScore(int value)
      : value_(std::clamp(value, 0, 100)) {}
  constexpr int value() const { return value_; }
  friend constexpr auto operator<=>(LexicalScore, LexicalScore) = default;

 private:
  int value_ = 0;
};

namespace fuzzy {

inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();
  thread_local std::vector<std::size_t> row;
  row.resize(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

// round(100 * (1 - d / max_len)), half rounded up, computed in integers.
inline LexicalScore ratio_normalized(std::u32string_view a,
                                     std::u32string_view b) {
  const std::size_t len = std::max(a.size(), b.size());
  if (len == 0) return LexicalScore(100);
  const std::size_t d = levenshtein(a, b);
  const std::size_t num = 200 * (len - d) + len;
  return LexicalScore(static_cast<int>(num / (2 * len)));
}

// Pre-split forms of one string, reused across many comparisons.
struct PreparedText {
  std::u32string norm;
  std::u32string sorted_joined;
  std::vector<std::u32string> token_set;  // sorted, unique

  explicit PreparedText(std::string_view raw) : norm(text::normalize(raw)) {
    auto tokens = text::split_tokens(norm);
    std::sort(tokens.begin(), tokens.end());
    sorted_joined = text::join_tokens(tokens);
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    token_set = std::move(tokens);
  }
};

inline LexicalScore base_ratio(const PreparedText& a, const PreparedText& b) {
  return ratio_normalized(a.norm, b.norm);
}

inline LexicalScore token_sort_ratio(const PreparedText& a,
                                     const PreparedText& b) {
  return ratio_normalized(a.sorted_joined, b.sorted_joined);
}

inline LexicalScore token_set_ratio(const PreparedText& a,
                                    const PreparedText& b) {
  std::vector<std::u32string> common, only_a, only_b;
  std::set_intersection(a.token_set.begin(), a.token_set.end(),
                        b.token_set.begin(), b.token_set.end(),
                        std::back_inserter(common));
  std::set_difference(a.token_set.begin(), a.token_set.end(),
                      b.token_set.begin(), b.token_set.end(),
                      std::back_inserter(only_a));
  std::set_difference(b.token_set.begin(), b.token_set.end(),
                      a.token_set.begin(), a.token_set.end(),
                      std::back_inserter(only_b));
  const std::u32string inter = text::join_tokens(common);
  auto extend = [&inter](const std::vector<std::u32string>& rest) {
    std::u32string tail = text::join_tokens(rest);
    if (inter.empty()) return tail;
    if (tail.empty()) return inter;
    return inter + U' ' + tail;
  };
  const std::u32string x = extend(only_a);
  const std::u32string y = extend(only_b);
  return std::max({ratio_normalized(inter, x), ratio_normalized(inter, y),
                   ratio_normalized(x, y)});
}

inline LexicalScore composite(const PreparedText& a, const PreparedText& b) {
  return std::max(
      {base_ratio(a, b), token_sort_ratio(a, b), token_set_ratio(a, b)});
}

}  // namespace fuzzy

inline LexicalScore base_ratio(std::string_view a, std::string_view b) {
  return fuzzy::base_ratio(fuzzy::PreparedText(a), fuzzy::PreparedText(b));
}

inline LexicalScore token_sort_ratio(std::string_view a, std::string_view b) {
  return fuzzy::token_sort_ratio(fuzzy::PreparedText(a),
                                 fuzzy::PreparedText(b));
}

inline LexicalScore token_set_ratio(std::string_view a, std::string_view b) {
  return fuzzy::token_set_ratio(fuzzy::PreparedText(a),
                                fuzzy::PreparedText(b));
}

}  // namespace i2cr
