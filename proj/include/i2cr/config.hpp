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

// Run configuration: a flat "key = value" file, overridable by I2CR_*
// environment variables and then by command-line settings.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "i2cr/errors.hpp"
#include "i2cr/evaluation.hpp"
#include "i2cr/mock_backends.hpp"
#include "i2cr/pipeline_config.hpp"
#include "i2cr/text.hpp"

extern char** environ;

namespace i2cr {

struct BackendSettings {
  std::string backend_url;  // default for every role
  std::string selector_url, embed_url, xmodal_url, i2t_url, summarize_url;
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_ms = 200;
  int max_concurrency = 8;
  MockMode mock_mode = MockMode::strict;

  std::string url_for(const std::string& role_url) const {
    return role_url.empty() ? backend_url : role_url;
  }
};

struct RunConfig {
  std::string preset;
  PipelineConfig pipeline;
  BackendSettings backends;
  EvalOptions eval;
  bool summarize = false;
  std::size_t max_description_chars = 512;

  nlohmann::json to_json() const {
    std::vector<std::size_t> ks = eval.ks;
    return {{"preset", preset},
            {"pipeline", pipeline.to_json()},
            {"backends",
             {{"backend_url", backends.backend_url},
              {"selector_url", backends.selector_url},
              {"embed_url", backends.embed_url},
              {"xmodal_url", backends.xmodal_url},
              {"i2t_url", backends.i2t_url},
              {"summarize_url", backends.summarize_url},
              {"timeout_ms", backends.timeout_ms},
              {"max_attempts", backends.max_attempts},
              {"backoff_ms", backends.backoff_ms},
              {"max_concurrency", backends.max_concurrency},
              {"mock_mode",
               backends.mock_mode == MockMode::strict ? "strict" : "lenient"}}},
            {"eval",
             {{"ks", ks},
              {"workers", eval.workers},
              {"max_failure_rate", eval.max_failure_rate},
              {"nil_scoring",
               eval.nil_scoring == NilScoring::strict ? "strict" : "ignore"}}},
            {"summarize", summarize},
            {"max_description_chars", max_description_chars}};
  }
};

struct DatasetPreset {
  const char* name;
  double alpha;
  double beta;
};

// ICR/IAV thresholds tuned on the validation split of each benchmark.
inline constexpr DatasetPreset kPresets[] = {
    {"wikimel", 0.5, 31.0},
    {"wikidiverse", 0.8, 31.0},
    {"richmel", 0.75, 31.0},
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Parses "key = value" lines; '#' starts a comment line.
inline KeyValues parse_key_values(std::string_view doc) {
  KeyValues out;
  std::istringstream in{std::string(doc)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    auto key = text::trim(t.substr(0, eq));
    if (key.empty()) throw ParseError(lineno, "empty key");
    out.emplace_back(std::move(key), text::trim(t.substr(eq + 1)));
  }
  return out;
}

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  const auto s = text::ascii_lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long n = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

inline std::size_t parse_positive(const std::string& key, const std::string& v) {
  const long n = parse_int(key, v);
  if (n < 1) throw ConfigError(key + " must be >= 1");
  return static_cast<std::size_t>(n);
}

inline std::vector<std::size_t> parse_k_list(const std::string& key,
                                             const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_positive(key, text::trim(item)));
  if (out.empty()) throw ConfigError(key + " is empty");
  return out;
}

}  // namespace detail

inline void apply_preset(RunConfig& cfg, const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      cfg.preset = name;
      cfg.pipeline.alpha = p.alpha;
      cfg.pipeline.beta = p.beta;
      return;
    }
  }
  throw ConfigError("unknown preset '" + name + "'");
}

// Every accepted key, with its setter.
inline const std::map<std::string,
                      std::function<void(RunConfig&, const std::string&)>>&
config_setters() {
  using namespace detail;
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"preset", [](RunConfig& c, const std::string& v) { apply_preset(c, v); }},
      {"k", [](RunConfig& c, const std::string& v) { c.pipeline.k = parse_positive("k", v); }},
      {"alpha", [](RunConfig& c, const std::string& v) { c.pipeline.alpha = parse_double("alpha", v); }},
      {"beta", [](RunConfig& c, const std::string& v) { c.pipeline.beta = parse_double("beta", v); }},
      {"icr_retry_limit", [](RunConfig& c, const std::string& v) {
         c.pipeline.icr_retry_limit = static_cast<int>(parse_positive("icr_retry_limit", v)); }},
      {"selector_attempts", [](RunConfig& c, const std::string& v) {
         c.pipeline.selector_attempts = static_cast<int>(parse_positive("selector_attempts", v)); }},
      {"clue_order", [](RunConfig& c, const std::string& v) {
         c.pipeline.clue_order = ConfigDelta::parse_kinds(v); }},
      {"enabled_clue_kinds", [](RunConfig& c, const std::string& v) {
         c.pipeline.enabled_clue_kinds = ConfigDelta::parse_kinds(v); }},
      {"enable_icr", [](RunConfig& c, const std::string& v) { c.pipeline.enable_icr = parse_bool("enable_icr", v); }},
      {"enable_iav", [](RunConfig& c, const std::string& v) { c.pipeline.enable_iav = parse_bool("enable_iav", v); }},
      {"enable_vif", [](RunConfig& c, const std::string& v) { c.pipeline.enable_vif = parse_bool("enable_vif", v); }},
      {"clue_injection", [](RunConfig& c, const std::string& v) {
         if (v == "per_round") c.pipeline.injection = ClueInjection::per_round;
         else if (v == "all_at_once") c.pipeline.injection = ClueInjection::all_at_once;
         else throw ConfigError("clue_injection must be per_round or all_at_once"); }},
      {"temperature", [](RunConfig& c, const std::string& v) {
         c.pipeline.temperature = parse_double("temperature", v); }},
      {"instruction", [](RunConfig& c, const std::string& v) { c.pipeline.instruction = v; }},
      {"instruction_file", [](RunConfig& c, const std::string& v) {
         try {
           c.pipeline.instruction = text::trim(text::read_file(v));
         } catch (const Error& e) {
           throw ConfigError(e.what());
         } }},
      {"backend_url", [](RunConfig& c, const std::string& v) { c.backends.backend_url = v; }},
      {"selector_url", [](RunConfig& c, const std::string& v) { c.backends.selector_url = v; }},
      {"embed_url", [](RunConfig& c, const std::string& v) { c.backends.embed_url = v; }},
      {"xmodal_url", [](RunConfig& c, const std::string& v) { c.backends.xmodal_url = v; }},
      {"i2t_url", [](RunConfig& c, const std::string& v) { c.backends.i2t_url = v; }},
      {"summarize_url", [](RunConfig& c, const std::string& v) { c.backends.summarize_url = v; }},
      {"timeout_ms", [](RunConfig& c, const std::string& v) {
         c.backends.timeout_ms = static_cast<int>(parse_positive("timeout_ms", v)); }},
      {"max_attempts", [](RunConfig& c, const std::string& v) {
         c.backends.max_attempts = static_cast<int>(parse_positive("max_attempts", v)); }},
      {"backoff_ms", [](RunConfig& c, const std::string& v) {
         const long n = parse_int("backoff_ms", v);
         if (n < 0) throw ConfigError("backoff_ms must be >= 0");
         c.backends.backoff_ms = static_cast<int>(n); }},
      {"max_concurrency", [](RunConfig& c, const std::string& v) {
         c.backends.max_concurrency = static_cast<int>(parse_positive("max_concurrency", v)); }},
      {"mock_mode", [](RunConfig& c, const std::string& v) {
         if (v == "strict") c.backends.mock_mode = MockMode::strict;
         else if (v == "lenient") c.backends.mock_mode = MockMode::lenient;
         else throw ConfigError("mock_mode must be strict or lenient"); }},
      {"eval_k", [](RunConfig& c, const std::string& v) { c.eval.ks = parse_k_list("eval_k", v); }},
      {"workers", [](RunConfig& c, const std::string& v) { c.eval.workers = parse_positive("workers", v); }},
      {"max_failure_rate", [](RunConfig& c, const std::string& v) {
         c.eval.max_failure_rate = parse_double("max_failure_rate", v); }},
      {"nil_scoring", [](RunConfig& c, const std::string& v) {
         if (v == "strict") c.eval.nil_scoring = NilScoring::strict;
         else if (v == "ignore") c.eval.nil_scoring = NilScoring::ignore;
         else throw ConfigError("nil_scoring must be strict or ignore"); }},
      {"summarize", [](RunConfig& c, const std::string& v) { c.summarize = parse_bool("summarize", v); }},
      {"max_description_chars", [](RunConfig& c, const std::string& v) {
         c.max_description_chars = parse_positive("max_description_chars", v); }},
  };
  return setters;
}

// Collects I2CR_<KEY> variables for known keys.
inline KeyValues env_overrides(char** env = environ) {
  KeyValues out;
  if (!env) return out;
  const auto& setters = config_setters();
  for (char** e = env; *e; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with("I2CR_")) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = text::ascii_lower(kv.substr(5, eq - 5));
    if (setters.count(key)) out.emplace_back(key, std::string(kv.substr(eq + 1)));
  }
  return out;
}

// Applies layers in order (later wins). A preset is applied before any
// explicit value regardless of where it appears.
inline RunConfig build_config(const std::vector<KeyValues>& layers) {
  RunConfig cfg;
  const auto& setters = config_setters();
  std::optional<std::string> preset;
  bool order_set = false, kinds_set = false;
  for (const auto& layer : layers) {
    for (const auto& [k, v] : layer) {
      if (!setters.count(k)) throw ConfigError("unknown config key '" + k + "'");
      if (k == "preset") preset = v;
      if (k == "clue_order") order_set = true;
      if (k == "enabled_clue_kinds") kinds_set = true;
    }
  }
  if (preset) apply_preset(cfg, *preset);
  for (const auto& layer : layers) {
    for (const auto& [k, v] : layer) {
      if (k != "preset") setters.at(k)(cfg, v);
    }
  }
  auto& p = cfg.pipeline;
  if (order_set && !kinds_set) {
    p.enabled_clue_kinds = p.clue_order;
  } else if (kinds_set && !order_set) {
    std::vector<ClueKind> order;
    for (auto k : kAllClueKinds) {
      if (std::find(p.enabled_clue_kinds.begin(), p.enabled_clue_kinds.end(),
                    k) != p.enabled_clue_kinds.end())
        order.push_back(k);
    }
    p.clue_order = order;
  }
  p.validate();
  return cfg;
}

inline KeyValues load_config_file(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file '" + path + "' not found");
  }
  try {
    return parse_key_values(text::read_file(path));
  } catch (const ParseError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace i2cr
