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

#include "i2cr/instruction_data.hpp"

#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "support/export_fixture.hpp"

namespace i2cr {
namespace {

std::vector<nlohmann::json> lines_of(const std::string& s) {
  std::vector<nlohmann::json> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
  return out;
}

KgSnapshot paris_kg() {
  return KgSnapshot({{"Q90", "Paris", "Capital of France", {}},
                     {"Q64", "Berlin", "Capital of Germany", {}},
                     {"Q84", "London", "Capital of England", {}}});
}

TEST(InstructionRecordTest, GoldAtRankOne) {
  const auto kg = paris_kg();
  const CandidateRetriever r(kg);
  ExportStats stats;
  MentionSample s{"Paris", "ctx", std::nullopt, "Q90", false};
  const auto rec = make_instruction_record(s, 0, kg, r, 2, "inst", stats);
  EXPECT_EQ(rec.output, "Paris");
  ASSERT_EQ(rec.candidates.size(), 2u);
  EXPECT_EQ(rec.candidates[0].name, "Paris");
  EXPECT_EQ(stats.gold_in_topk, 1u);
  EXPECT_EQ(stats.injected, 0u);
  const auto j = rec.to_json();
  EXPECT_EQ(j["input"]["mention"], "Paris");
  EXPECT_EQ(j["input"]["candidates"][0]["description"], "Capital of France");
  EXPECT_EQ(validate_instruction_record(j, 2), "");
}

TEST(InstructionRecordTest, GoldInjectedAtPositionK) {
  const auto kg = paris_kg();
  const CandidateRetriever r(kg);
  ExportStats stats;
  // Top-2 for "Paris" is Paris then Berlin; a London gold must replace
  // the second candidate.
  const auto top = retrieve_topk("Paris", kg, 2);
  ASSERT_EQ(top.entries[1].id, "Q64");
  MentionSample s{"Paris", "", std::nullopt, "Q84", false};
  const auto rec = make_instruction_record(s, 0, kg, r, 2, "inst", stats);
  ASSERT_EQ(rec.candidates.size(), 2u);
  EXPECT_EQ(rec.candidates[0].name, "Paris");
  EXPECT_EQ(rec.candidates[1].name, "London");
  EXPECT_EQ(rec.output, "London");
  EXPECT_EQ(stats.injected, 1u);
  EXPECT_EQ(stats.gold_in_topk, 0u);
}

TEST(InstructionRecordTest, OutOfKgAndMissingGold) {
  const auto kg = paris_kg();
  const CandidateRetriever r(kg);
  ExportStats stats;
  MentionSample nil{"Atlantis", "", std::nullopt, std::nullopt, true};
  EXPECT_EQ(make_instruction_record(nil, 0, kg, r, 3, "i", stats).output, "nil");
  EXPECT_EQ(stats.out_of_kg, 1u);
  MentionSample bad{"Paris", "", std::nullopt, std::nullopt, false};
  try {
    make_instruction_record(bad, 7, kg, r, 3, "i", stats);
    FAIL();
  } catch (const MissingGold& e) {
    EXPECT_EQ(e.index(), 7u);
  }
}

TEST(InstructionValidatorTest, RejectsBrokenRecords) {
  nlohmann::json ok = {{"instruction", "i"},
                       {"input",
                        {{"mention", "m"},
                         {"context", ""},
                         {"candidates", {{{"name", "A"}, {"description", "d"}}}}}},
                       {"output", "A"}};
  EXPECT_EQ(validate_instruction_record(ok, 1), "");
  auto wrong = ok;
  wrong["output"] = "B";
  EXPECT_NE(validate_instruction_record(wrong, 1), "");
  EXPECT_NE(validate_instruction_record(ok, 0), "");
  auto nil = wrong;
  nil["output"] = "nil";
  EXPECT_EQ(validate_instruction_record(nil, 1), "");
  EXPECT_NE(validate_instruction_record(nlohmann::json::object(), 1), "");
}

TEST(ExportInstructionsTest, FixtureExport) {
  const auto f = testing::make_export_fixture();
  ASSERT_EQ(f.dataset.size(), 100u);
  std::ostringstream out;
  const auto stats = export_instructions(f.dataset, f.kg, 10, out);
  EXPECT_EQ(stats.written, 100u);
  EXPECT_EQ(stats.out_of_kg, 10u);
  EXPECT_EQ(stats.with_gold, 90u);
  EXPECT_EQ(stats.injected, 5u);
  EXPECT_DOUBLE_EQ(stats.gold_in_topk_rate(), 85.0 / 90.0);
  const auto recs = lines_of(out.str());
  ASSERT_EQ(recs.size(), 100u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(validate_instruction_record(recs[i], 10), "") << i;
    if (f.dataset[i].out_of_kg) {
      EXPECT_EQ(recs[i]["output"], "nil");
    }
  }
  // Injected gold sits in the last slot.
  EXPECT_EQ(recs[85]["input"]["candidates"][9]["name"], recs[85]["output"]);
  std::ostringstream again;
  export_instructions(f.dataset, f.kg, 10, again);
  EXPECT_EQ(again.str(), out.str());
}

}  // namespace
}  // namespace i2cr
