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

// Named state-machine scenarios with hand-derived expectations. Shared by
// the unit suite and the acceptance binary.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "i2cr/pipeline.hpp"
#include "i2cr/trace.hpp"
#include "support/scenario.hpp"

namespace i2cr::testing {

// Compact event rendering: "tes:e1", "icr:e1:fail", "vif:ocr",
// "fallback:max_iav:e3", "pass".
inline std::vector<std::string> describe(const LinkTrace& t) {
  std::vector<std::string> out;
  for (const auto& ev : t.events) {
    if (std::holds_alternative<RetrievalEvent>(ev)) {
      out.push_back("retrieval");
    } else if (const auto* e = std::get_if<TesEvent>(&ev)) {
      out.push_back("tes:" + e->chosen.value_or("nil"));
    } else if (const auto* e = std::get_if<IcrEvent>(&ev)) {
      out.push_back("icr:" + e->entity + (e->pass ? ":pass" : ":fail"));
    } else if (const auto* e = std::get_if<IavEvent>(&ev)) {
      out.push_back("iav:" + e->entity + (e->pass ? ":pass" : ":fail"));
    } else if (const auto* e = std::get_if<VifEvent>(&ev)) {
      out.push_back("vif:" + to_string(e->kind));
    } else if (const auto* e = std::get_if<FallbackEvent>(&ev)) {
      out.push_back("fallback:" + to_string(e->rule) + ":" + e->entity.value_or("nil"));
    } else {
      out.push_back("pass");
    }
  }
  return out;
}

struct ScenarioCase {
  std::string name;
  KgSnapshot kg;
  MentionSample sample;
  Script script;
  PipelineConfig config;
  std::size_t K = 1;
  std::optional<std::string> prediction;
  std::vector<std::string> topk;  // checked when K > 1
  std::vector<std::string> events;
};

inline ScenarioCase make_case(std::string name, KgSnapshot kg, MentionSample s) {
  ScenarioCase c;
  c.name = std::move(name);
  c.kg = std::move(kg);
  c.sample = std::move(s);
  return c;
}

// Six entities named "Taylor ..."; every name contains the mention token,
// so all score 100 and retrieval order is by id.
inline KgSnapshot taylor_kg() {
  return KgSnapshot({{"e1", "Taylor Swift", "American singer-songwriter", {}},
                     {"e2", "Taylor Lautner", "American actor", {}},
                     {"e3", "Taylor Momsen", "American actress and singer", {}},
                     {"e4", "Taylor Hawkins", "American drummer", {}},
                     {"e5", "Taylor Kitsch", "Canadian actor", {}},
                     {"e6", "Taylor Mali", "American slam poet", {}}});
}

inline MentionSample taylor_sample(bool with_image) {
  MentionSample s;
  s.mention = "Taylor";
  s.context = "Taylor performed on stage last night.";
  if (with_image) s.image = Image{"poster-bytes"};
  return s;
}

// Selector picking the first remaining candidate whose name is listed,
// in list order of preference.
inline std::function<std::string(const SelectorRequest&)> prefer(
    std::vector<std::string> names) {
  return [names](const SelectorRequest& r) -> std::string {
    for (const auto& n : names)
      for (const auto& c : r.candidates)
        if (c.name == n) return n;
    return "nil";
  };
}

inline std::map<ClueKind, std::string> poster_clues() {
  return {{ClueKind::ocr, "MUSIC"},
          {ClueKind::cap, "a woman singing into a microphone"},
          {ClueKind::den, "woman holding microphone; stage lights"},
          {ClueKind::tag, "person; microphone"}};
}

inline std::vector<ScenarioCase> trace_scenarios() {
  std::vector<ScenarioCase> cases;
  const auto kg = taylor_kg();

  {
    auto c = make_case("icr_retry_then_success", kg, taylor_sample(true));
    c.script.select = pick_index(0);
    c.script.icr = {{"e1", 0.2}, {"e2", 0.3}, {"e3", 0.9}};
    c.script.iav = {{"e3", 40.0}};
    c.script.clues = poster_clues();
    c.prediction = "e3";
    c.events = {"retrieval", "tes:e1", "icr:e1:fail", "tes:e2", "icr:e2:fail",
                "tes:e3",    "icr:e3:pass", "iav:e3:pass"};
    cases.push_back(c);
  }
  {
    auto c = make_case("icr_retry_limit_keeps_last", kg, taylor_sample(false));
    c.script.select = pick_index(0);
    c.script.default_icr = 0.1;
    c.prediction = "e3";
    c.events = {"retrieval", "tes:e1", "icr:e1:fail", "tes:e2", "icr:e2:fail",
                "tes:e3",    "icr:e3:fail", "fallback:icr_retry_limit:e3"};
    cases.push_back(c);
  }
  {
    auto c = make_case("iav_pass_round_one", kg, taylor_sample(true));
    c.script.select = prefer({"Taylor Swift"});
    c.script.iav = {{"e1", 40.0}};
    c.script.clues = poster_clues();
    c.prediction = "e1";
    c.events = {"retrieval", "tes:e1", "icr:e1:pass", "iav:e1:pass"};
    cases.push_back(c);
  }
  {
    // One clue per round; round n selects the n-th candidate.
    auto c = make_case("iav_fails_every_round_max_score_wins", kg, taylor_sample(true));
    c.script.select = pick_by_round();
    c.script.iav = {{"e1", 10}, {"e2", 12}, {"e3", 30}, {"e4", 8}, {"e5", 9}};
    c.script.clues = poster_clues();
    c.prediction = "e3";
    c.events = {"retrieval",
                "tes:e1", "icr:e1:pass", "iav:e1:fail", "vif:ocr",
                "tes:e2", "icr:e2:pass", "iav:e2:fail", "vif:cap",
                "tes:e3", "icr:e3:pass", "iav:e3:fail", "vif:den",
                "tes:e4", "icr:e4:pass", "iav:e4:fail", "vif:tag",
                "tes:e5", "icr:e5:pass", "iav:e5:fail", "fallback:max_iav:e3"};
    cases.push_back(c);
  }
  {
    auto c = make_case("nil_then_ocr_recovery", kg, taylor_sample(true));
    c.script.select = [](const SelectorRequest& r) -> std::string {
      for (const auto& clue : r.visual_clues)
        if (clue.kind == ClueKind::ocr && clue.text == "MUSIC") return "Taylor Swift";
      return "nil";
    };
    c.script.iav = {{"e1", 36.0}};
    c.script.clues = poster_clues();
    c.prediction = "e1";
    c.events = {"retrieval", "tes:nil", "vif:ocr", "tes:e1", "icr:e1:pass", "iav:e1:pass"};
    cases.push_back(c);
  }
  {
    auto c = make_case("imageless_short_circuit", kg, taylor_sample(false));
    c.script.select = prefer({"Taylor Lautner"});
    c.script.default_iav = 0.0;  // never consulted
    c.prediction = "e2";
    c.events = {"retrieval", "tes:e2", "icr:e2:pass"};
    cases.push_back(c);
  }
  {
    auto c = make_case("unparseable_falls_back_to_top_candidate", kg, taylor_sample(true));
    c.script.select = [](const SelectorRequest&) { return std::string("I think it is Tay"); };
    c.script.clues = poster_clues();
    c.prediction = "e1";
    c.events = {"retrieval", "tes:e1", "fallback:unparseable:e1", "icr:e1:pass",
                "iav:e1:pass"};
    cases.push_back(c);
  }
  {
    auto c = make_case("nil_in_every_round", kg, taylor_sample(true));
    c.script.select = [](const SelectorRequest&) { return std::string("nil"); };
    c.script.clues = poster_clues();
    c.prediction = std::nullopt;
    c.events = {"retrieval", "tes:nil", "vif:ocr", "tes:nil", "vif:cap", "tes:nil",
                "vif:den",   "tes:nil", "vif:tag", "tes:nil", "fallback:all_nil:nil"};
    cases.push_back(c);
  }
  {
    auto c = make_case("iav_equal_to_beta_fails", kg, taylor_sample(true));
    c.script.select = prefer({"Taylor Swift"});
    c.script.iav = {{"e1", 31.0}};
    c.config.enable_vif = false;
    c.prediction = "e1";
    c.events = {"retrieval", "tes:e1", "icr:e1:pass", "iav:e1:fail",
                "fallback:max_iav:e1"};
    cases.push_back(c);
  }
  {
    // Orthogonal embeddings give a cosine of exactly 0, equal to alpha.
    auto c = make_case("icr_equal_to_alpha_fails", kg, taylor_sample(false));
    c.script.select = pick_index(0);
    c.script.icr = {{"e1", 0.0}};
    c.config.alpha = 0.0;
    c.prediction = "e2";
    c.events = {"retrieval", "tes:e1", "icr:e1:fail", "tes:e2", "icr:e2:pass"};
    cases.push_back(c);
  }
  {
    auto c = make_case("without_bcd_is_single_selection", kg, taylor_sample(true));
    c.script.select = prefer({"Taylor Momsen"});
    c.script.default_icr = 0.0;
    c.script.default_iav = 0.0;
    c.config.enable_icr = c.config.enable_iav = c.config.enable_vif = false;
    c.prediction = "e3";
    c.events = {"retrieval", "tes:e3"};
    cases.push_back(c);
  }
  {
    auto c = make_case("all_clues_at_once", kg, taylor_sample(true));
    c.script.select = [](const SelectorRequest& r) -> std::string {
      return r.visual_clues.size() == 4 ? "Taylor Swift" : "nil";
    };
    c.script.iav = {{"e1", 38.0}};
    c.script.clues = poster_clues();
    c.config.injection = ClueInjection::all_at_once;
    c.prediction = "e1";
    c.events = {"retrieval", "vif:ocr", "vif:cap", "vif:den", "vif:tag",
                "tes:e1",    "icr:e1:pass", "iav:e1:pass"};
    cases.push_back(c);
  }
  {
    auto c = make_case("custom_clue_order", kg, taylor_sample(true));
    c.script.select = [](const SelectorRequest& r) -> std::string {
      return r.visual_clues.empty() ? "Taylor Kitsch" : "Taylor Swift";
    };
    c.script.iav = {{"e5", 5.0}, {"e1", 35.0}};
    c.script.clues = poster_clues();
    c.config.clue_order = {ClueKind::tag, ClueKind::den, ClueKind::cap, ClueKind::ocr};
    c.prediction = "e1";
    c.events = {"retrieval", "tes:e5",      "icr:e5:pass", "iav:e5:fail",
                "vif:tag",   "tes:e1",      "icr:e1:pass", "iav:e1:pass"};
    cases.push_back(c);
  }
  {
    auto c = make_case("max_iav_tie_goes_to_later_round", kg, taylor_sample(true));
    c.script.select = pick_by_round();
    c.script.iav = {{"e1", 20.0}, {"e2", 20.0}};
    c.script.clues = poster_clues();
    c.config.enabled_clue_kinds = {ClueKind::ocr};
    c.config.clue_order = {ClueKind::ocr};
    c.prediction = "e2";
    c.events = {"retrieval", "tes:e1", "icr:e1:pass", "iav:e1:fail", "vif:ocr",
                "tes:e2",    "icr:e2:pass", "iav:e2:fail", "fallback:max_iav:e2"};
    cases.push_back(c);
  }
  {
    // ICR-rejected candidates come back once a new clue opens a round.
    auto c = make_case("pool_restored_after_clue", kg, taylor_sample(true));
    c.script.select = prefer({"Taylor Swift", "Taylor Momsen"});
    c.script.icr = {{"e1", 0.55}};
    c.script.iav = {{"e1", 35.0}, {"e3", 20.0}};
    c.script.clues = poster_clues();
    c.config.alpha = 0.6;
    c.config.enabled_clue_kinds = {ClueKind::ocr};
    c.config.clue_order = {ClueKind::ocr};
    c.prediction = "e3";
    c.events = {"retrieval", "tes:e1", "icr:e1:fail", "tes:e3", "icr:e3:pass",
                "iav:e3:fail", "vif:ocr", "tes:e1", "icr:e1:fail", "tes:e3",
                "icr:e3:pass", "iav:e3:fail", "fallback:max_iav:e3"};
    cases.push_back(c);
  }
  {
    KgSnapshot abc({{"A", "Alpha X", "first", {}},
                    {"B", "Beta X", "second", {}},
                    {"C", "Gamma X", "third", {}}});
    MentionSample s{"X", "", std::nullopt, std::nullopt, false};
    auto c = make_case("topk_failing_entities_ranked_by_score", abc, s);
    c.script.select = prefer({"Beta X", "Gamma X", "Alpha X"});
    c.script.icr = {{"A", 0.9}, {"B", 0.4}, {"C", 0.1}};
    c.K = 3;
    c.prediction = "A";
    c.topk = {"A", "B", "C"};
    c.events = {"retrieval", "tes:B", "icr:B:fail", "tes:C", "icr:C:fail", "tes:A",
                "icr:A:pass", "pass", "tes:B", "icr:B:fail", "tes:C", "icr:C:fail",
                "tes:nil", "fallback:all_nil:nil"};
    cases.push_back(c);
  }
  return cases;
}

struct ScenarioVerdict {
  bool ok = true;
  std::vector<std::string> problems;
};

// Runs one case (record, then strict replay) and compares everything the
// case pins down.
inline ScenarioVerdict check_scenario(const ScenarioCase& c) {
  ScenarioVerdict v;
  auto complain = [&](std::string m) {
    v.ok = false;
    v.problems.push_back(std::move(m));
  };
  try {
    const auto run = run_scenario(c.kg, c.sample, c.script, c.config, c.K);
    for (auto& p : validate_trace(run.result.trace, c.config)) complain("grammar: " + p);
    if (run.result.prediction != c.prediction)
      complain("prediction " + run.result.prediction.value_or("nil"));
    if (replay_prediction(run.result.trace) != run.result.prediction)
      complain("trace does not replay to the prediction");
    const auto got = describe(run.result.trace);
    if (got != c.events) {
      std::string s;
      for (const auto& e : got) s += e + " ";
      complain("events " + s);
    }
    if (c.K > 1 && run.result.topk != c.topk) complain("topk mismatch");
    if (to_json(run.result.trace).dump() != run.recorded_trace)
      complain("replayed trace differs from recorded trace");
  } catch (const std::exception& e) {
    complain(std::string("threw: ") + e.what());
  }
  return v;
}

}  // namespace i2cr::testing
