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

// Instruction-tuning export for the entity selector: one JSONL record per
// training sample with the instruction, a dictionary-style input (mention,
// context, candidates) and the gold entity name or "nil".

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "i2cr/errors.hpp"
#include "i2cr/kg_store.hpp"
#include "i2cr/pipeline.hpp"
#include "i2cr/retrieval.hpp"

namespace i2cr {

struct InstructionRecord {
  std::string instruction;
  std::string mention;
  std::string context;
  std::vector<CandidateText> candidates;
  std::string output;

  nlohmann::json to_json() const {
    auto cands = nlohmann::json::array();
    for (const auto& c : candidates) {
      cands.push_back({{"name", c.name}, {"description", c.description}});
    }
    return {{"instruction", instruction},
            {"input",
             {{"mention", mention}, {"context", context}, {"candidates", cands}}},
            {"output", output}};
  }
};

struct ExportStats {
  std::size_t written = 0;
  std::size_t with_gold = 0;
  std::size_t gold_in_topk = 0;  // before injection
  std::size_t injected = 0;
  std::size_t out_of_kg = 0;

  double gold_in_topk_rate() const {
    return with_gold ? static_cast<double>(gold_in_topk) / with_gold : 0.0;
  }

  nlohmann::json to_json() const {
    return {{"written", written},         {"with_gold", with_gold},
            {"gold_in_topk", gold_in_topk}, {"injected", injected},
            {"out_of_kg", out_of_kg},     {"gold_in_topk_rate", gold_in_topk_rate()}};
  }
};

// Builds one record. A gold entity missing from the Top-k replaces the
// lowest-ranked candidate (or is appended when fewer than k exist).
inline InstructionRecord make_instruction_record(
    const MentionSample& s, std::size_t index, const KgSnapshot& kg,
    const CandidateRetriever& retriever, std::size_t k,
    const std::string& instruction, ExportStats& stats) {
  if (!s.gold_id && !s.out_of_kg) throw MissingGold(index);
  const auto cset = retriever.retrieve(s.mention, k);
  std::vector<const EntityRecord*> cands;
  for (const auto& c : cset.entries) cands.push_back(&kg.at(c.id));

  InstructionRecord rec{instruction, s.mention, s.context, {}, "nil"};
  if (s.out_of_kg) {
    ++stats.out_of_kg;
  } else {
    const auto* gold = kg.find(*s.gold_id);
    if (!gold) {
      throw Error("sample " + std::to_string(index) + ": gold id '" +
                  *s.gold_id + "' not in KG");
    }
    ++stats.with_gold;
    if (std::find(cands.begin(), cands.end(), gold) != cands.end()) {
      ++stats.gold_in_topk;
    } else {
      ++stats.injected;
      if (cands.size() >= k) cands.back() = gold;
      else cands.push_back(gold);
    }
    rec.output = gold->name;
  }
  for (const auto* e : cands) rec.candidates.push_back({e->name, e->description});
  return rec;
}

// Empty string when valid, otherwise the reason.
inline std::string validate_instruction_record(const nlohmann::json& j,
                                               std::size_t k) {
  try {
    const auto& input = j.at("input");
    j.at("instruction").get<std::string>();
    input.at("mention").get<std::string>();
    input.at("context").get<std::string>();
    const auto output = j.at("output").get<std::string>();
    const auto& cands = input.at("candidates");
    if (!cands.is_array()) return "candidates is not a list";
    if (cands.size() > k) return "more than k candidates";
    if (output == "nil") return {};
    for (const auto& c : cands) {
      c.at("description").get<std::string>();
      if (c.at("name").get<std::string>() == output) return {};
    }
    return "output matches no candidate name";
  } catch (const nlohmann::json::exception& e) {
    return e.what();
  }
}

inline ExportStats export_instructions(
    const std::vector<MentionSample>& dataset, const KgSnapshot& kg,
    std::size_t k, std::ostream& out,
    const std::string& instruction = kDefaultInstruction) {
  if (k == 0) throw Error("k must be >= 1");
  const CandidateRetriever retriever(kg);
  ExportStats stats;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto rec = make_instruction_record(dataset[i], i, kg, retriever, k,
                                             instruction, stats);
    out << rec.to_json().dump() << '\n';
    ++stats.written;
  }
  return stats;
}

inline ExportStats export_instructions(
    const std::vector<MentionSample>& dataset, const KgSnapshot& kg,
    std::size_t k, const std::string& path,
    const std::string& instruction = kDefaultInstruction) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  return export_instructions(dataset, kg, k, out, instruction);
}

}  // namespace i2cr
