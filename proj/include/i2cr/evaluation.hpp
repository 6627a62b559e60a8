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

// Batch evaluation: Top-K accuracy, average response time, ablation and
// clue-order sweeps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "i2cr/errors.hpp"
#include "i2cr/pipeline.hpp"
#include "i2cr/text.hpp"

namespace i2cr {

// strict: NIL-gold samples are correct iff the prediction is NIL.
// ignore: NIL-gold samples are left out of the denominator.
enum class NilScoring { strict, ignore };

struct EvalRecord {
  std::size_t index = 0;
  std::string mention;
  std::optional<std::string> gold;  // nullopt: out-of-KG (NIL)
  std::optional<std::string> prediction;
  std::vector<std::string> ranked;
  double wall_time = 0.0;
  std::optional<std::string> error;
  LinkTrace trace;
};

inline bool correct_at(const EvalRecord& r, std::size_t K) {
  if (r.error) return false;
  if (!r.gold) return !r.prediction;
  const auto n = std::min(K, r.ranked.size());
  return std::find(r.ranked.begin(),
                   r.ranked.begin() + static_cast<std::ptrdiff_t>(n),
                   *r.gold) != r.ranked.begin() + static_cast<std::ptrdiff_t>(n);
}

inline double topk_accuracy(const std::vector<EvalRecord>& records,
                            std::size_t K,
                            NilScoring mode = NilScoring::strict) {
  if (K == 0) throw Error("K must be >= 1");
  std::size_t n = 0, hits = 0;
  for (const auto& r : records) {
    if (mode == NilScoring::ignore && !r.gold) continue;
    ++n;
    if (correct_at(r, K)) ++hits;
  }
  if (n == 0) throw EmptyEvalSet();
  return static_cast<double>(hits) / static_cast<double>(n);
}

inline double avg_response_time(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EmptyEvalSet();
  double sum = 0.0;
  for (const auto& r : records) sum += r.wall_time;
  return sum / static_cast<double>(records.size());
}

struct EvalOptions {
  std::vector<std::size_t> ks{1, 3, 5};
  std::size_t workers = 1;
  // Fraction of failed samples above which run_eval throws.
  double max_failure_rate = 0.2;
  NilScoring nil_scoring = NilScoring::strict;
};

struct EvalReport {
  std::string label;
  std::vector<std::size_t> ks;
  std::vector<double> accuracy;  // parallel to ks
  double avg_time_seconds = 0.0;
  std::size_t n = 0;
  std::size_t failures = 0;
  std::vector<EvalRecord> records;
  std::string config_fingerprint;
  nlohmann::json config;

  double accuracy_at(std::size_t K) const {
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (ks[i] == K) return accuracy[i];
    }
    throw Error("report has no accuracy for K=" + std::to_string(K));
  }
};

inline std::optional<std::string> sample_gold(const MentionSample& s,
                                              std::size_t index) {
  if (s.out_of_kg) return std::nullopt;
  if (!s.gold_id) throw MissingGold(index);
  return s.gold_id;
}

inline EvalReport run_eval(const std::vector<MentionSample>& dataset,
                           const KgSnapshot& kg, const Backends& backends,
                           const PipelineConfig& config,
                           const EvalOptions& options = {}) {
  if (dataset.empty()) throw EmptyEvalSet();
  if (options.ks.empty()) throw Error("no K values requested");
  const Linker linker(kg, backends, config);
  const std::size_t max_k =
      *std::max_element(options.ks.begin(), options.ks.end());

  std::vector<EvalRecord> records(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    records[i].index = i;
    records[i].mention = dataset[i].mention;
    records[i].gold = sample_gold(dataset[i], i);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      auto& rec = records[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        auto res = linker.link_topk(dataset[i], max_k);
        rec.prediction = std::move(res.prediction);
        rec.ranked = std::move(res.topk);
        rec.trace = std::move(res.trace);
        rec.wall_time = res.wall_time;
      } catch (const LinkFailure& e) {
        rec.error = e.what();
        rec.trace = e.partial_trace();
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      if (rec.error) {
        rec.wall_time = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
      }
    }
  };
  const std::size_t n_workers =
      std::clamp<std::size_t>(options.workers, 1, dataset.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  EvalReport report;
  report.ks = options.ks;
  report.n = records.size();
  report.failures = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(),
                    [](const EvalRecord& r) { return r.error.has_value(); }));
  const double failure_rate =
      static_cast<double>(report.failures) / static_cast<double>(report.n);
  if (failure_rate > options.max_failure_rate) {
    const auto& first = *std::find_if(records.begin(), records.end(),
                                      [](const EvalRecord& r) {
                                        return r.error.has_value();
                                      });
    throw Error("failure rate " + std::to_string(failure_rate) +
                " exceeds cap; first error: " + *first.error);
  }
  for (auto K : options.ks) {
    report.accuracy.push_back(topk_accuracy(records, K, options.nil_scoring));
  }
  report.avg_time_seconds = avg_response_time(records);
  report.config = config.to_json();
  report.config_fingerprint = config.fingerprint();
  report.records = std::move(records);
  return report;
}

// ---------------------------------------------------------------------------
// Ablations. A delta is written as '+'-joined parts:
//   full                  no change
//   w/o bcd               drop ICR (b), IAV (c) and/or VIF (d)
//   w/o ocr,cap           drop clue kinds
//   order:den,ocr,cap,tag clue order
//   all-at-once           inject every clue in round 1

struct ConfigDelta {
  bool drop_icr = false;
  bool drop_iav = false;
  bool drop_vif = false;
  std::vector<ClueKind> drop_kinds;
  std::optional<std::vector<ClueKind>> order;
  bool all_at_once = false;

  std::string label() const {
    std::vector<std::string> parts;
    if (drop_icr || drop_iav || drop_vif) {
      std::string s = "w/o ";
      if (drop_icr) s += 'b';
      if (drop_iav) s += 'c';
      if (drop_vif) s += 'd';
      parts.push_back(s);
    }
    auto join = [](const std::vector<ClueKind>& kinds) {
      std::string s;
      for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (i) s += ',';
        s += to_string(kinds[i]);
      }
      return s;
    };
    if (!drop_kinds.empty()) parts.push_back("w/o " + join(drop_kinds));
    if (order) parts.push_back("order:" + join(*order));
    if (all_at_once) parts.push_back("all-at-once");
    if (parts.empty()) return "full";
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += '+';
      out += parts[i];
    }
    return out;
  }

  void apply(PipelineConfig& c) const {
    if (drop_icr) c.enable_icr = false;
    if (drop_iav) c.enable_iav = false;
    if (drop_vif) c.enable_vif = false;
    for (auto k : drop_kinds) {
      std::erase(c.enabled_clue_kinds, k);
      std::erase(c.clue_order, k);
    }
    if (order) c.clue_order = *order;
    if (all_at_once) c.injection = ClueInjection::all_at_once;
  }

  static std::vector<ClueKind> parse_kinds(const std::string& list) {
    std::vector<ClueKind> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto k = parse_clue_kind(item);
      if (!k) throw ConfigError("unknown clue kind '" + item + "'");
      if (std::find(out.begin(), out.end(), *k) != out.end())
        throw ConfigError("clue kind repeated: '" + item + "'");
      out.push_back(*k);
    }
    return out;
  }

  static ConfigDelta parse(const std::string& label) {
    ConfigDelta d;
    std::stringstream ss(label);
    std::string part;
    while (std::getline(ss, part, '+')) {
      part = text::trim(part);
      if (part == "full") continue;
      if (part == "all-at-once") {
        d.all_at_once = true;
      } else if (part.starts_with("order:")) {
        d.order = parse_kinds(part.substr(6));
      } else if (part.starts_with("w/o ")) {
        const auto rest = text::trim(part.substr(4));
        const bool letters =
            !rest.empty() && rest.find_first_not_of("bcd") == std::string::npos;
        if (letters) {
          for (char c : rest) {
            if (c == 'b') d.drop_icr = true;
            if (c == 'c') d.drop_iav = true;
            if (c == 'd') d.drop_vif = true;
          }
        } else {
          auto kinds = parse_kinds(rest);
          d.drop_kinds.insert(d.drop_kinds.end(), kinds.begin(), kinds.end());
        }
      } else {
        throw ConfigError("unrecognized ablation '" + part + "'");
      }
    }
    return d;
  }
};

// Semicolon-separated list of delta labels.
inline std::vector<ConfigDelta> parse_ablation_spec(const std::string& spec) {
  std::vector<ConfigDelta> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (text::trim(item).empty()) continue;
    out.push_back(ConfigDelta::parse(item));
  }
  return out;
}

inline std::vector<std::pair<std::string, EvalReport>> run_ablation(
    const std::vector<MentionSample>& dataset, const KgSnapshot& kg,
    const Backends& backends, const PipelineConfig& base,
    const std::vector<ConfigDelta>& deltas, const EvalOptions& options = {}) {
  std::vector<std::pair<std::string, EvalReport>> out;
  for (const auto& d : deltas) {
    PipelineConfig cfg = base;
    d.apply(cfg);
    auto report = run_eval(dataset, kg, backends, cfg, options);
    report.label = d.label();
    out.emplace_back(report.label, std::move(report));
  }
  return out;
}

// Accuracy with the pipeline capped at r rounds, r = 1 .. 1 + |clue_order|:
// round r may use the first r-1 kinds of the configured clue order.
inline std::vector<EvalReport> run_round_sweep(
    const std::vector<MentionSample>& dataset, const KgSnapshot& kg,
    const Backends& backends, const PipelineConfig& base,
    const EvalOptions& options = {}) {
  std::vector<EvalReport> out;
  for (std::size_t r = 1; r <= 1 + base.clue_order.size(); ++r) {
    PipelineConfig cfg = base;
    cfg.clue_order.resize(r - 1);
    cfg.enabled_clue_kinds = cfg.clue_order;
    auto report = run_eval(dataset, kg, backends, cfg, options);
    report.label = "rounds<=" + std::to_string(r);
    out.push_back(std::move(report));
  }
  return out;
}

// One report per permutation of the configured clue order.
inline std::vector<EvalReport> run_order_sweep(
    const std::vector<MentionSample>& dataset, const KgSnapshot& kg,
    const Backends& backends, const PipelineConfig& base,
    const EvalOptions& options = {}) {
  auto order = base.clue_order;
  std::sort(order.begin(), order.end());
  std::vector<EvalReport> out;
  do {
    ConfigDelta d;
    d.order = order;
    PipelineConfig cfg = base;
    d.apply(cfg);
    auto report = run_eval(dataset, kg, backends, cfg, options);
    report.label = d.label();
    out.push_back(std::move(report));
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

struct RepeatSummary {
  std::vector<std::size_t> ks;
  std::vector<double> mean;
  std::vector<double> stddev;  // population
  std::size_t repeats = 0;
};

// Repeats the same evaluation; run-to-run spread only appears with
// sampling backends.
inline RepeatSummary run_repeated(const std::vector<MentionSample>& dataset,
                                  const KgSnapshot& kg,
                                  const Backends& backends,
                                  const PipelineConfig& config,
                                  std::size_t repeats,
                                  const EvalOptions& options = {}) {
  if (repeats == 0) throw Error("repeats must be >= 1");
  RepeatSummary s;
  s.ks = options.ks;
  s.repeats = repeats;
  std::vector<std::vector<double>> acc(options.ks.size());
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto r = run_eval(dataset, kg, backends, config, options);
    for (std::size_t j = 0; j < r.accuracy.size(); ++j) {
      acc[j].push_back(r.accuracy[j]);
    }
  }
  for (const auto& v : acc) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    s.mean.push_back(m);
    s.stddev.push_back(std::sqrt(var / v.size()));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Serialization. Timing is kept apart from the rest so that reports from
// mock runs are byte-stable.

inline nlohmann::json report_to_json(const EvalReport& r,
                                     bool include_records = true) {
  nlohmann::json acc = nlohmann::json::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    acc["top" + std::to_string(r.ks[i])] = r.accuracy[i];
  }
  nlohmann::json j = {{"label", r.label},
                      {"n", r.n},
                      {"failures", r.failures},
                      {"accuracy", acc},
                      {"config_fingerprint", r.config_fingerprint},
                      {"config", r.config}};
  if (include_records) {
    auto recs = nlohmann::json::array();
    for (const auto& rec : r.records) {
      nlohmann::json correct = nlohmann::json::object();
      for (auto K : r.ks) correct["top" + std::to_string(K)] = correct_at(rec, K);
      recs.push_back(
          {{"index", rec.index},
           {"mention", rec.mention},
           {"gold", rec.gold ? nlohmann::json(*rec.gold) : nlohmann::json()},
           {"prediction",
            rec.prediction ? nlohmann::json(*rec.prediction) : nlohmann::json()},
           {"ranked", rec.ranked},
           {"correct", correct},
           {"error", rec.error ? nlohmann::json(*rec.error) : nlohmann::json()}});
    }
    j["records"] = recs;
  }
  return j;
}

inline nlohmann::json timing_to_json(const EvalReport& r) {
  std::vector<double> times;
  for (const auto& rec : r.records) times.push_back(rec.wall_time);
  return {{"label", r.label},
          {"avg_time_seconds", r.avg_time_seconds},
          {"wall_times", times}};
}

inline constexpr const char* kTimingFooter =
    "Avg-Time covers the full Top-K call including backend latency; with mock "
    "backends it is near zero and only comparable against live runs.";

// Plain-text results table: one row per report, one column per K.
inline std::string format_table(const std::vector<const EvalReport*>& reports,
                                bool include_time) {
  std::ostringstream out;
  std::size_t width = 8;
  for (const auto* r : reports) width = std::max(width, r->label.size());
  char buf[64];
  auto pad = [&](const std::string& s) {
    return s + std::string(width - std::min(width, s.size()), ' ');
  };
  std::vector<std::size_t> ks = reports.empty() ? std::vector<std::size_t>{}
                                                : reports.front()->ks;
  out << pad("Setting");
  for (auto K : ks) out << " | Top-" << K;
  if (include_time) out << " | Avg-Time(s)";
  out << "\n";
  for (const auto* r : reports) {
    out << pad(r->label.empty() ? "default" : r->label);
    for (auto K : ks) {
      std::snprintf(buf, sizeof buf, "%5.1f", 100.0 * r->accuracy_at(K));
      out << " | " << buf;
    }
    if (include_time) {
      std::snprintf(buf, sizeof buf, "%11.4f", r->avg_time_seconds);
      out << " | " << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace i2cr
