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

// Stage one of entity selection: Top-k lexical candidates for a mention,
// scored against entity names and aliases. Descriptions are not scanned.

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "i2cr/fuzzy.hpp"
#include "i2cr/kg_store.hpp"

namespace i2cr {

struct ScoredCandidate {
  std::string id;
  LexicalScore score;

  friend bool operator==(const ScoredCandidate&,
                         const ScoredCandidate&) = default;
};

// Sorted by score descending, ties by ascending id; no duplicate ids.
struct CandidateSet {
  std::string query;
  std::size_t k = 0;
  std::vector<ScoredCandidate> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

inline LexicalScore lexical_score(const fuzzy::PreparedText& mention,
                                  const EntityRecord& entity) {
  LexicalScore best = fuzzy::composite(mention, fuzzy::PreparedText(entity.name));
  for (const auto& alias : entity.aliases) {
    if (best.value() == 100) break;
    best = std::max(best, fuzzy::composite(mention, fuzzy::PreparedText(alias)));
  }
  return best;
}

inline LexicalScore lexical_score(std::string_view mention,
                                  const EntityRecord& entity) {
  return lexical_score(fuzzy::PreparedText(mention), entity);
}

// Precomputes normalized names/aliases for a snapshot so repeated queries
// skip re-tokenizing the KG. Holds a reference; the snapshot must outlive it.
class CandidateRetriever {
 public:
  explicit CandidateRetriever(const KgSnapshot& kg) : kg_(&kg) {
    prepared_.reserve(kg.size());
    for (const auto& e : kg) {
      std::vector<fuzzy::PreparedText> forms;
      forms.reserve(1 + e.aliases.size());
      forms.emplace_back(e.name);
      for (const auto& a : e.aliases) forms.emplace_back(a);
      prepared_.push_back(std::move(forms));
    }
  }

  const KgSnapshot& kg() const { return *kg_; }

  CandidateSet retrieve(std::string_view mention, std::size_t k) const {
    if (k == 0) throw Error("retrieve_topk requires k >= 1");
    const fuzzy::PreparedText query(mention);
    std::vector<ScoredCandidate> all;
    all.reserve(kg_->size());
    std::size_t i = 0;
    for (const auto& e : *kg_) {
      LexicalScore best;
      for (const auto& form : prepared_[i]) {
        best = std::max(best, fuzzy::composite(query, form));
        if (best.value() == 100) break;
      }
      all.push_back({e.id, best});
      ++i;
    }
    const std::size_t n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n),
                      all.end(), ranks_before);
    all.resize(n);
    return CandidateSet{std::string(mention), k, std::move(all)};
  }

 private:
  const KgSnapshot* kg_;
  std::vector<std::vector<fuzzy::PreparedText>> prepared_;
};

inline CandidateSet retrieve_topk(std::string_view mention,
                                  const KgSnapshot& kg, std::size_t k) {
  return CandidateRetriever(kg).retrieve(mention, k);
}

}  // namespace i2cr
