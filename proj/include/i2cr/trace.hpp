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

// Event log of one link call, its JSON form, and a validator for the
// event grammar:
//
//   trace  := retrieval pass (pass_marker pass)*
//   pass   := vif* round+ terminal?          (leading vif: all-at-once mode)
//   round  := select+ iav? vif?
//   select := tes fallback(unparseable)? icr? fallback(icr_retry_limit)?
//
// with the per-event constraints checked in validate_trace.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "i2cr/backends.hpp"
#include "i2cr/errors.hpp"
#include "i2cr/pipeline_config.hpp"
#include "i2cr/retrieval.hpp"

namespace i2cr {

struct RetrievalEvent {
  std::vector<ScoredCandidate> candidates;
};

struct TesEvent {
  int round = 1;
  std::optional<std::string> chosen;  // nullopt: NIL
  std::string raw;
  int attempts = 0;  // 0 when no backend call was made
};

struct GateEvent {
  int round = 1;
  std::string entity;
  double score = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct IcrEvent : GateEvent {};
struct IavEvent : GateEvent {};

struct VifEvent {
  int round = 1;  // the round this clue is first visible in
  ClueKind kind = ClueKind::ocr;
  std::string text;
};

enum class FallbackRule { unparseable, icr_retry_limit, max_iav, all_nil };

struct FallbackEvent {
  int round = 1;
  FallbackRule rule = FallbackRule::all_nil;
  std::optional<std::string> entity;
};

// Separates successive passes of a Top-K run.
struct PassEvent {
  int index = 2;
};

using TraceEvent = std::variant<RetrievalEvent, TesEvent, IcrEvent, IavEvent,
                                VifEvent, FallbackEvent, PassEvent>;

struct LinkTrace {
  std::vector<TraceEvent> events;

  template <typename E>
  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const TraceEvent& ev) {
          return std::holds_alternative<E>(ev);
        }));
  }
};

inline std::string to_string(FallbackRule r) {
  switch (r) {
    case FallbackRule::unparseable: return "unparseable";
    case FallbackRule::icr_retry_limit: return "icr_retry_limit";
    case FallbackRule::max_iav: return "max_iav";
    case FallbackRule::all_nil: return "all_nil";
  }
  return "?";
}

namespace detail {

inline nlohmann::json optional_id(const std::optional<std::string>& id) {
  return id ? nlohmann::json(*id) : nlohmann::json(nullptr);
}

inline nlohmann::json gate_json(const char* type, const GateEvent& g) {
  return {{"type", type},          {"round", g.round},
          {"entity", g.entity},    {"score", g.score},
          {"threshold", g.threshold}, {"pass", g.pass}};
}

}  // namespace detail

inline nlohmann::json to_json(const TraceEvent& ev) {
  struct Visitor {
    nlohmann::json operator()(const RetrievalEvent& e) const {
      auto arr = nlohmann::json::array();
      for (const auto& c : e.candidates) {
        arr.push_back({{"id", c.id}, {"score", c.score.value()}});
      }
      return {{"type", "retrieval"}, {"candidates", arr}};
    }
    nlohmann::json operator()(const TesEvent& e) const {
      return {{"type", "tes"},
              {"round", e.round},
              {"chosen", detail::optional_id(e.chosen)},
              {"raw", e.raw},
              {"attempts", e.attempts}};
    }
    nlohmann::json operator()(const IcrEvent& e) const {
      return detail::gate_json("icr", e);
    }
    nlohmann::json operator()(const IavEvent& e) const {
      return detail::gate_json("iav", e);
    }
    nlohmann::json operator()(const VifEvent& e) const {
      return {{"type", "vif"},
              {"round", e.round},
              {"kind", to_string(e.kind)},
              {"text", e.text}};
    }
    nlohmann::json operator()(const FallbackEvent& e) const {
      return {{"type", "fallback"},
              {"round", e.round},
              {"rule", to_string(e.rule)},
              {"entity", detail::optional_id(e.entity)}};
    }
    nlohmann::json operator()(const PassEvent& e) const {
      return {{"type", "pass"}, {"index", e.index}};
    }
  };
  return std::visit(Visitor{}, ev);
}

inline nlohmann::json to_json(const LinkTrace& trace) {
  auto arr = nlohmann::json::array();
  for (const auto& ev : trace.events) arr.push_back(to_json(ev));
  return arr;
}

// Prediction implied by the first pass of a trace (nullopt: NIL).
// Inverse of to_json(LinkTrace). Throws ParseError on malformed input.
inline LinkTrace trace_from_json(const nlohmann::json& arr) {
  auto opt_id = [](const nlohmann::json& j) -> std::optional<std::string> {
    if (j.is_null()) return std::nullopt;
    return j.get<std::string>();
  };
  auto gate = [](const nlohmann::json& j) {
    GateEvent g;
    g.round = j.at("round").get<int>();
    g.entity = j.at("entity").get<std::string>();
    g.score = j.at("score").get<double>();
    g.threshold = j.at("threshold").get<double>();
    g.pass = j.at("pass").get<bool>();
    return g;
  };
  LinkTrace t;
  try {
    if (!arr.is_array()) throw ParseError(0, "trace must be an array");
    for (const auto& j : arr) {
      const auto type = j.at("type").get<std::string>();
      if (type == "retrieval") {
        RetrievalEvent e;
        for (const auto& c : j.at("candidates")) {
          e.candidates.push_back(
              {c.at("id").get<std::string>(), LexicalScore(c.at("score").get<int>())});
        }
        t.events.emplace_back(std::move(e));
      } else if (type == "tes") {
        t.events.emplace_back(TesEvent{j.at("round").get<int>(), opt_id(j.at("chosen")),
                                       j.at("raw").get<std::string>(),
                                       j.at("attempts").get<int>()});
      } else if (type == "icr") {
        t.events.emplace_back(IcrEvent{gate(j)});
      } else if (type == "iav") {
        t.events.emplace_back(IavEvent{gate(j)});
      } else if (type == "vif") {
        const auto kind = parse_clue_kind(j.at("kind").get<std::string>());
        if (!kind) throw ParseError(0, "unknown clue kind");
        t.events.emplace_back(
            VifEvent{j.at("round").get<int>(), *kind, j.at("text").get<std::string>()});
      } else if (type == "fallback") {
        const auto rule = j.at("rule").get<std::string>();
        FallbackEvent e{j.at("round").get<int>(), FallbackRule::all_nil, opt_id(j.at("entity"))};
        if (rule == "unparseable") e.rule = FallbackRule::unparseable;
        else if (rule == "icr_retry_limit") e.rule = FallbackRule::icr_retry_limit;
        else if (rule == "max_iav") e.rule = FallbackRule::max_iav;
        else if (rule != "all_nil") throw ParseError(0, "unknown fallback rule");
        t.events.emplace_back(std::move(e));
      } else if (type == "pass") {
        t.events.emplace_back(PassEvent{j.at("index").get<int>()});
      } else {
        throw ParseError(0, "unknown event type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, e.what());
  }
  return t;
}

inline std::optional<std::string> replay_prediction(const LinkTrace& trace) {
  std::optional<std::string> current;
  for (const auto& ev : trace.events) {
    if (std::holds_alternative<PassEvent>(ev)) break;
    if (const auto* tes = std::get_if<TesEvent>(&ev)) {
      if (tes->chosen) current = tes->chosen;
    } else if (const auto* fb = std::get_if<FallbackEvent>(&ev)) {
      if (fb->rule == FallbackRule::max_iav) return fb->entity;
      if (fb->rule == FallbackRule::all_nil) return std::nullopt;
    }
  }
  return current;
}

namespace detail {

class TraceValidator {
 public:
  TraceValidator(const LinkTrace& t, const PipelineConfig& c)
      : ev_(t.events), cfg_(c) {}

  std::vector<std::string> run() {
    if (ev_.empty()) return {"empty trace"};
    const auto* retrieval = std::get_if<RetrievalEvent>(&ev_[0]);
    if (!retrieval) return {"trace must start with a retrieval event"};
    for (const auto& c : retrieval->candidates) candidates_.insert(c.id);
    pos_ = 1;
    int pass_index = 1;
    while (ok() && pos_ < ev_.size()) {
      if (pass_index > 1) {
        const auto* p = next<PassEvent>();
        if (!p) {
          fail("expected pass marker");
          break;
        }
        if (p->index != pass_index) fail("pass marker out of sequence");
      }
      validate_pass();
      ++pass_index;
    }
    if (pass_index == 1 && ok()) fail("trace has no selection pass");
    return problems_;
  }

 private:
  struct Best {
    int round;
    std::string entity;
    double score;
  };

  bool ok() const { return problems_.empty(); }
  void fail(std::string msg) {
    problems_.push_back("event " + std::to_string(pos_) + ": " +
                        std::move(msg));
  }

  template <typename E>
  const E* peek() const {
    return pos_ < ev_.size() ? std::get_if<E>(&ev_[pos_]) : nullptr;
  }

  template <typename E>
  const E* next() {
    const E* e = peek<E>();
    if (e) ++pos_;
    return e;
  }

  void check_gate(const GateEvent& g, int round, const std::string& entity,
                  double threshold, const char* what) {
    if (g.round != round) fail(std::string(what) + " round mismatch");
    if (g.entity != entity) fail(std::string(what) + " entity mismatch");
    if (g.threshold != threshold) fail(std::string(what) + " threshold mismatch");
    if (g.pass != (g.score > g.threshold))
      fail(std::string(what) + " pass flag disagrees with strict comparison");
  }

  void validate_pass() {
    std::set<ClueKind> used;
    if (cfg_.injection == ClueInjection::all_at_once) {
      while (const auto* v = next<VifEvent>()) {
        if (v->round != 1) fail("all-at-once clue outside round 1");
        check_clue_kind(v->kind, used);
      }
    }
    std::vector<Best> best;
    for (int round = 1; ok(); ++round) {
      if (static_cast<std::size_t>(round) > cfg_.max_rounds()) {
        fail("round count exceeds maximum");
        return;
      }
      std::optional<std::string> selected;
      int icr_fails = 0;
      while (ok()) {
        const auto* tes = next<TesEvent>();
        if (!tes) {
          fail("expected tes event");
          return;
        }
        if (tes->round != round) fail("tes round mismatch");
        if (!tes->chosen) break;
        const std::string entity = *tes->chosen;
        if (!candidates_.count(entity)) fail("tes chose a non-candidate");
        if (const auto* fb = peek<FallbackEvent>();
            fb && fb->rule == FallbackRule::unparseable) {
          ++pos_;
          if (fb->entity != entity) fail("unparseable fallback entity mismatch");
        }
        if (!cfg_.enable_icr) {
          if (peek<IcrEvent>()) fail("icr event while icr disabled");
          selected = entity;
          break;
        }
        const auto* icr = next<IcrEvent>();
        if (!icr) {
          fail("expected icr event");
          return;
        }
        check_gate(*icr, round, entity, cfg_.alpha, "icr");
        if (icr->pass) {
          selected = entity;
          break;
        }
        if (++icr_fails == cfg_.icr_retry_limit) {
          const auto* fb = next<FallbackEvent>();
          if (!fb || fb->rule != FallbackRule::icr_retry_limit ||
              fb->entity != entity) {
            fail("expected icr_retry_limit fallback");
            return;
          }
          selected = entity;
          break;
        }
      }
      if (!ok()) return;
      if (selected) {
        const auto* iav = next<IavEvent>();
        if (!iav) return;  // accepted without an image gate
        if (!cfg_.enable_iav) fail("iav event while iav disabled");
        check_gate(*iav, round, *selected, cfg_.beta, "iav");
        if (iav->pass) return;
        best.push_back({round, *selected, iav->score});
      }
      if (const auto* v = next<VifEvent>()) {
        if (!cfg_.enable_vif || cfg_.injection != ClueInjection::per_round)
          fail("vif event not permitted by config");
        if (v->round != round + 1) fail("vif round must open the next round");
        const auto idx = static_cast<std::size_t>(round - 1);
        if (idx >= cfg_.clue_order.size() || cfg_.clue_order[idx] != v->kind)
          fail("vif kind does not follow clue_order");
        check_clue_kind(v->kind, used);
        continue;
      }
      const auto* fb = next<FallbackEvent>();
      if (!fb) {
        fail("missing terminal fallback");
        return;
      }
      if (best.empty()) {
        if (fb->rule != FallbackRule::all_nil || fb->entity)
          fail("expected all_nil fallback");
      } else {
        const Best* top = &best.front();
        for (const auto& b : best) {
          if (b.score >= top->score) top = &b;
        }
        if (fb->rule != FallbackRule::max_iav || fb->entity != top->entity)
          fail("expected max_iav fallback on the best-scoring round");
      }
      return;
    }
  }

  void check_clue_kind(ClueKind k, std::set<ClueKind>& used) {
    if (std::find(cfg_.enabled_clue_kinds.begin(),
                  cfg_.enabled_clue_kinds.end(),
                  k) == cfg_.enabled_clue_kinds.end())
      fail("clue kind not enabled");
    if (!used.insert(k).second) fail("clue kind repeated within a pass");
  }

  const std::vector<TraceEvent>& ev_;
  const PipelineConfig& cfg_;
  std::set<std::string> candidates_;
  std::size_t pos_ = 0;
  std::vector<std::string> problems_;
};

}  // namespace detail

// Returns the list of grammar violations; empty means the trace is valid.
inline std::vector<std::string> validate_trace(const LinkTrace& trace,
                                               const PipelineConfig& config) {
  return detail::TraceValidator(trace, config).run();
}

}  // namespace i2cr
