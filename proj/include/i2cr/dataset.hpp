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

// Dataset JSONL: {"mention", "context", "image"?, "gold_id"?, "out_of_kg"?}
// with image paths resolved against the dataset file's directory.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "i2cr/errors.hpp"
#include "i2cr/pipeline.hpp"
#include "i2cr/text.hpp"

namespace i2cr {

inline MentionSample parse_sample(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir,
                                  std::size_t lineno) {
  if (!j.is_object()) throw ParseError(lineno, "expected a JSON object");
  MentionSample s;
  try {
    s.mention = j.at("mention").get<std::string>();
    s.context = j.value("context", std::string());
    if (auto it = j.find("image"); it != j.end() && !it->is_null()) {
      std::filesystem::path p = it->get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      s.image = Image{text::read_file(p.string())};
    }
    if (auto it = j.find("gold_id"); it != j.end() && !it->is_null()) {
      s.gold_id = it->get<std::string>();
    }
    s.out_of_kg = j.value("out_of_kg", false);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(lineno, e.what());
  } catch (const Error& e) {
    throw ParseError(lineno, e.what());
  }
  if (s.mention.empty()) throw ParseError(lineno, "empty mention");
  return s;
}

inline std::vector<MentionSample> load_dataset(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path();
  std::istringstream in(text::read_file(path));
  std::vector<MentionSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    out.push_back(parse_sample(j, base, lineno));
  }
  return out;
}

}  // namespace i2cr
