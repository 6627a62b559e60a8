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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "i2cr/backends.hpp"
#include "i2cr/errors.hpp"
#include "i2cr/text.hpp"

namespace i2cr {

inline constexpr const char* kDefaultInstruction =
    "You are given a mention, the text it appears in, optional visual clues "
    "extracted from the accompanying image, and a list of candidate entities "
    "with their descriptions. Select the candidate entity the mention refers "
    "to and answer with its name exactly as it appears in the list. If no "
    "candidate matches the mention, answer \"nil\".";

// per_round feeds one new clue per round; all_at_once extracts every
// enabled clue before the first round and runs a single round.
enum class ClueInjection { per_round, all_at_once };

struct PipelineConfig {
  std::size_t k = 10;
  double alpha = 0.5;
  double beta = 31.0;
  int icr_retry_limit = 3;
  // Selector attempts per TES call before falling back on unparseable output.
  int selector_attempts = 3;
  std::vector<ClueKind> clue_order{kAllClueKinds.begin(), kAllClueKinds.end()};
  std::vector<ClueKind> enabled_clue_kinds{kAllClueKinds.begin(),
                                           kAllClueKinds.end()};
  bool enable_icr = true;
  bool enable_iav = true;
  bool enable_vif = true;
  ClueInjection injection = ClueInjection::per_round;
  double temperature = kDefaultTemperature;
  std::string instruction = kDefaultInstruction;

  std::size_t max_rounds() const {
    if (!enable_vif || injection == ClueInjection::all_at_once) return 1;
    return 1 + enabled_clue_kinds.size();
  }

  void validate() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!std::isfinite(alpha)) throw ConfigError("alpha must be finite");
    if (!std::isfinite(beta)) throw ConfigError("beta must be finite");
    if (icr_retry_limit < 1) throw ConfigError("icr_retry_limit must be >= 1");
    if (selector_attempts < 1)
      throw ConfigError("selector_attempts must be >= 1");
    if (!(temperature >= 0.0 && temperature <= 2.0))
      throw ConfigError("temperature must be in [0, 2]");
    auto sorted = [](std::vector<ClueKind> v) {
      std::sort(v.begin(), v.end());
      return v;
    };
    const auto order = sorted(clue_order);
    if (std::adjacent_find(order.begin(), order.end()) != order.end())
      throw ConfigError("clue_order repeats a kind");
    if (order != sorted(enabled_clue_kinds))
      throw ConfigError("clue_order must be a permutation of enabled_clue_kinds");
  }

  nlohmann::json to_json() const {
    auto kinds = [](const std::vector<ClueKind>& v) {
      std::vector<std::string> out;
      for (auto c : v) out.push_back(to_string(c));
      return out;
    };
    return {{"k", k},
            {"alpha", alpha},
            {"beta", beta},
            {"icr_retry_limit", icr_retry_limit},
            {"selector_attempts", selector_attempts},
            {"clue_order", kinds(clue_order)},
            {"enabled_clue_kinds", kinds(enabled_clue_kinds)},
            {"enable_icr", enable_icr},
            {"enable_iav", enable_iav},
            {"enable_vif", enable_vif},
            {"clue_injection",
             injection == ClueInjection::per_round ? "per_round"
                                                   : "all_at_once"},
            {"temperature", temperature},
            {"instruction", instruction}};
  }

  std::string fingerprint() const { return text::digest(to_json().dump()); }
};

}  // namespace i2cr
