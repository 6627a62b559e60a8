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

// The linking state machine: target entity selection, the intra-modal
// consistency gate (text/text cosine vs alpha), the inter-modal alignment
// gate (text/image score vs beta) and visual iterative feedback, which
// adds one image-derived clue per round until a selection clears both
// gates or the clue kinds run out.

#include <algorithm>
#include <chrono>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "i2cr/backends.hpp"
#include "i2cr/errors.hpp"
#include "i2cr/kg_store.hpp"
#include "i2cr/pipeline_config.hpp"
#include "i2cr/retrieval.hpp"
#include "i2cr/trace.hpp"

namespace i2cr {

struct MentionSample {
  std::string mention;
  std::string context;
  std::optional<Image> image;
  std::optional<std::string> gold_id;
  bool out_of_kg = false;
};

// prediction is nullopt for NIL, in which case topk is empty. Otherwise
// topk (when requested) starts with the prediction.
struct LinkResult {
  std::optional<std::string> prediction;
  std::vector<std::string> topk;
  LinkTrace trace;
  double wall_time = 0.0;
};

// A backend (or other) failure during link; carries the trace up to the
// failing call.
class LinkFailure : public Error {
 public:
  LinkFailure(const std::string& what, LinkTrace partial, bool unavailable)
      : Error(what), trace_(std::move(partial)), unavailable_(unavailable) {}
  const LinkTrace& partial_trace() const { return trace_; }
  // True when the backend could not be reached or timed out.
  bool backend_unavailable() const { return unavailable_; }

 private:
  LinkTrace trace_;
  bool unavailable_;
};

// Mention context: mention, textual context, then one "<KIND>: <text>"
// line per clue in acquisition order, joined by newlines. Empty segments
// are dropped.
inline std::string build_mention_context(const MentionSample& sample,
                                         const std::vector<VisualClue>& clues,
                                         int round) {
  if (round < 1) throw Error("round must be >= 1");
  std::vector<std::string> parts{sample.mention, sample.context};
  for (const auto& c : clues) parts.push_back(clue_label(c.kind) + ": " + c.text);
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out.push_back('\n');
    out += p;
  }
  return out;
}

inline std::string build_entity_context(const EntityRecord& e) {
  return e.description.empty() ? e.name : e.name + "\n" + e.description;
}

inline double icr_score(const std::string& mention_context,
                        const std::string& entity_context, Embedder& embedder) {
  return cosine(embedder.embed(mention_context),
                embedder.embed(entity_context));
}

// Uses the entity description, not its name.
inline double iav_score(const EntityRecord& entity, const Image& image,
                        CrossModalScorer& scorer) {
  return scorer.cross_modal_score(entity.description, image);
}

inline SelectorRequest build_selector_request(
    const MentionSample& sample, const std::vector<const EntityRecord*>& cands,
    const std::vector<VisualClue>& clues, const PipelineConfig& config) {
  SelectorRequest req;
  req.instruction = config.instruction;
  req.mention = sample.mention;
  req.context = sample.context;
  req.visual_clues = clues;
  req.temperature = config.temperature;
  for (const auto* e : cands) req.candidates.push_back({e->name, e->description});
  return req;
}

// Asks the selector for one of `cands` (lexical order). Returns nullptr for
// NIL. Unparseable output is retried up to selector_attempts times, then
// the first candidate is taken and a fallback event recorded.
inline const EntityRecord* run_tes(const MentionSample& sample,
                                   const std::vector<const EntityRecord*>& cands,
                                   const std::vector<VisualClue>& clues,
                                   Selector& selector,
                                   const PipelineConfig& config,
                                   LinkTrace* trace = nullptr, int round = 1) {
  auto emit = [&](TraceEvent ev) {
    if (trace) trace->events.push_back(std::move(ev));
  };
  if (cands.empty()) {
    emit(TesEvent{round, std::nullopt, "", 0});
    return nullptr;
  }
  const auto req = build_selector_request(sample, cands, clues, config);
  std::string last_raw;
  for (int attempt = 1; attempt <= config.selector_attempts; ++attempt) {
    try {
      auto resp = selector.select_entity(req);
      const EntityRecord* chosen =
          resp.choice ? cands[*resp.choice] : nullptr;
      emit(TesEvent{round,
                    chosen ? std::optional<std::string>(chosen->id)
                           : std::nullopt,
                    std::move(resp.raw_text), attempt});
      return chosen;
    } catch (const Unparseable& u) {
      last_raw = u.raw_text();
    }
  }
  const EntityRecord* top = cands.front();
  emit(TesEvent{round, top->id, last_raw, config.selector_attempts});
  emit(FallbackEvent{round, FallbackRule::unparseable, top->id});
  return top;
}

inline const EntityRecord* run_tes(const MentionSample& sample,
                                   const CandidateSet& candidates,
                                   const std::vector<VisualClue>& clues,
                                   Selector& selector, const KgSnapshot& kg,
                                   const PipelineConfig& config = {}) {
  std::vector<const EntityRecord*> cands;
  for (const auto& c : candidates.entries) cands.push_back(&kg.at(c.id));
  return run_tes(sample, cands, clues, selector, config);
}

class Linker {
 public:
  // The snapshot must outlive the linker.
  Linker(const KgSnapshot& kg, Backends backends, PipelineConfig config)
      : kg_(kg),
        retriever_(kg),
        backends_(std::move(backends)),
        config_(std::move(config)) {
    config_.validate();
    if (!backends_.selector) throw ConfigError("selector backend missing");
    if (config_.enable_icr && !backends_.embedder)
      throw ConfigError("icr enabled but no embedder backend");
    if (config_.enable_iav && !backends_.xmodal)
      throw ConfigError("iav enabled but no cross-modal backend");
    if (config_.enable_vif && !backends_.extractor)
      throw ConfigError("vif enabled but no clue extractor backend");
  }

  const PipelineConfig& config() const { return config_; }
  const KgSnapshot& kg() const { return kg_; }

  LinkResult link(const MentionSample& sample) const {
    auto r = link_topk(sample, 1);
    r.topk.clear();
    return r;
  }

  // Repeats the selection process, excluding entities already accepted,
  // until K are accepted or a pass accepts nothing. Gate-failing entities
  // follow the accepted ones, best observed score first; remaining slots
  // are filled in lexical order.
  LinkResult link_topk(const MentionSample& sample, std::size_t K) const {
    if (K == 0) throw Error("K must be >= 1");
    if (sample.mention.empty()) throw Error("mention must be non-empty");
    const auto start = std::chrono::steady_clock::now();
    Run run(*this, sample);
    LinkResult result;
    try {
      result = run.execute(K);
    } catch (const LinkFailure&) {
      throw;
    } catch (const BackendTimeout& e) {
      throw LinkFailure(e.what(), std::move(run.trace), true);
    } catch (const BackendUnavailable& e) {
      throw LinkFailure(e.what(), std::move(run.trace), true);
    } catch (const std::exception& e) {
      throw LinkFailure(e.what(), std::move(run.trace), false);
    }
    result.wall_time = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    return result;
  }

 private:
  struct Observed {
    std::optional<double> icr_best;
    std::optional<double> iav_best;
  };

  struct PassOutcome {
    const EntityRecord* entity = nullptr;  // nullptr: NIL
    bool accepted = false;
  };

  // Per-sample mutable state; one per link call.
  struct Run {
    const Linker& self;
    const MentionSample& sample;
    const PipelineConfig& cfg;
    LinkTrace trace;
    std::vector<const EntityRecord*> candidates;
    std::map<std::string, Observed> observed;
    std::map<ClueKind, VisualClue> clue_cache;
    std::unordered_map<std::string, EmbeddingVector> embed_cache;

    Run(const Linker& l, const MentionSample& s)
        : self(l), sample(s), cfg(l.config_) {}

    void emit(TraceEvent ev) { trace.events.push_back(std::move(ev)); }

    const VisualClue& clue(ClueKind kind) {
      auto it = clue_cache.find(kind);
      if (it == clue_cache.end()) {
        it = clue_cache
                 .emplace(kind, self.backends_.extractor->extract_visual_clue(
                                    *sample.image, kind))
                 .first;
      }
      return it->second;
    }

    const EmbeddingVector& embedding(const std::string& text) {
      auto it = embed_cache.find(text);
      if (it == embed_cache.end()) {
        it = embed_cache.emplace(text, self.backends_.embedder->embed(text))
                 .first;
      }
      return it->second;
    }

    void observe_icr(const std::string& id, double s) {
      auto& o = observed[id];
      o.icr_best = o.icr_best ? std::max(*o.icr_best, s) : s;
    }
    void observe_iav(const std::string& id, double s) {
      auto& o = observed[id];
      o.iav_best = o.iav_best ? std::max(*o.iav_best, s) : s;
    }

    PassOutcome run_pass(const std::vector<const EntityRecord*>& pool) {
      const bool has_image = sample.image.has_value();
      std::vector<VisualClue> clues;
      if (cfg.injection == ClueInjection::all_at_once && cfg.enable_vif &&
          has_image) {
        for (auto kind : cfg.clue_order) {
          const auto& c = clue(kind);
          emit(VifEvent{1, kind, c.text});
          clues.push_back(c);
        }
      }
      struct RoundBest {
        int round;
        const EntityRecord* entity;
        double score;
      };
      std::vector<RoundBest> best;
      for (int round = 1;; ++round) {
        std::vector<const EntityRecord*> remaining = pool;
        const EntityRecord* selected = nullptr;
        const std::string mention_ctx =
            build_mention_context(sample, clues, round);
        int icr_fails = 0;
        while (true) {
          const EntityRecord* e =
              run_tes(sample, remaining, clues, *self.backends_.selector, cfg,
                      &trace, round);
          if (!e) break;
          if (!cfg.enable_icr) {
            selected = e;
            break;
          }
          const double s =
              cosine(embedding(mention_ctx), embedding(build_entity_context(*e)));
          const bool pass = s > cfg.alpha;
          emit(IcrEvent{{round, e->id, s, cfg.alpha, pass}});
          observe_icr(e->id, s);
          if (pass) {
            selected = e;
            break;
          }
          std::erase(remaining, e);
          if (++icr_fails >= cfg.icr_retry_limit) {
            emit(FallbackEvent{round, FallbackRule::icr_retry_limit, e->id});
            selected = e;
            break;
          }
        }
        if (selected) {
          if (!(cfg.enable_iav && has_image)) return {selected, true};
          const double s =
              iav_score(*selected, *sample.image, *self.backends_.xmodal);
          const bool pass = s > cfg.beta;
          emit(IavEvent{{round, selected->id, s, cfg.beta, pass}});
          observe_iav(selected->id, s);
          if (pass) return {selected, true};
          best.push_back({round, selected, s});
        }
        const auto next_clue = static_cast<std::size_t>(round - 1);
        if (cfg.injection == ClueInjection::per_round && cfg.enable_vif &&
            has_image && next_clue < cfg.clue_order.size()) {
          const auto kind = cfg.clue_order[next_clue];
          const auto& c = clue(kind);
          emit(VifEvent{round + 1, kind, c.text});
          clues.push_back(c);
          continue;
        }
        if (best.empty()) {
          emit(FallbackEvent{round, FallbackRule::all_nil, std::nullopt});
          return {nullptr, false};
        }
        const RoundBest* top = &best.front();
        for (const auto& b : best) {
          if (b.score >= top->score) top = &b;  // ties go to the later round
        }
        emit(FallbackEvent{round, FallbackRule::max_iav, top->entity->id});
        return {top->entity, false};
      }
    }

    LinkResult execute(std::size_t K) {
      const auto cset = self.retriever_.retrieve(sample.mention, cfg.k);
      emit(RetrievalEvent{cset.entries});
      for (const auto& c : cset.entries) candidates.push_back(&self.kg_.at(c.id));

      std::vector<const EntityRecord*> accepted;
      PassOutcome first;
      for (std::size_t pass = 0; pass < candidates.size() || pass == 0; ++pass) {
        if (pass > 0) emit(PassEvent{static_cast<int>(pass) + 1});
        std::vector<const EntityRecord*> pool;
        for (const auto* c : candidates) {
          if (std::find(accepted.begin(), accepted.end(), c) == accepted.end())
            pool.push_back(c);
        }
        const auto outcome = run_pass(pool);
        if (pass == 0) first = outcome;
        if (!outcome.accepted) break;
        accepted.push_back(outcome.entity);
        if (accepted.size() >= K || accepted.size() == candidates.size()) break;
      }

      LinkResult r;
      if (!first.entity) {
        r.trace = std::move(trace);
        return r;
      }
      r.prediction = first.entity->id;
      std::vector<std::string> topk;
      auto push = [&](const std::string& id) {
        if (topk.size() < K &&
            std::find(topk.begin(), topk.end(), id) == topk.end())
          topk.push_back(id);
      };
      for (const auto* e : accepted) push(e->id);
      push(first.entity->id);

      struct Failing {
        double score;
        std::size_t lexical_rank;
        std::string id;
      };
      std::vector<Failing> failing;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto it = observed.find(candidates[i]->id);
        if (it == observed.end()) continue;
        const auto& o = it->second;
        failing.push_back({o.iav_best ? *o.iav_best : *o.icr_best, i,
                           candidates[i]->id});
      }
      std::stable_sort(failing.begin(), failing.end(),
                       [](const Failing& a, const Failing& b) {
                         return a.score > b.score;
                       });
      for (const auto& f : failing) push(f.id);
      for (const auto* c : candidates) push(c->id);
      r.topk = std::move(topk);
      r.trace = std::move(trace);
      return r;
    }
  };

  const KgSnapshot& kg_;
  CandidateRetriever retriever_;
  Backends backends_;
  PipelineConfig config_;
};

inline LinkResult link(const MentionSample& sample, const KgSnapshot& kg,
                       const Backends& backends, const PipelineConfig& config) {
  return Linker(kg, backends, config).link(sample);
}

inline LinkResult link_topk(const MentionSample& sample, const KgSnapshot& kg,
                            const Backends& backends,
                            const PipelineConfig& config, std::size_t K) {
  return Linker(kg, backends, config).link_topk(sample, K);
}

}  // namespace i2cr
