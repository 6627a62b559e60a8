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

// Knowledge-graph snapshot: immutable, id-ordered entity records loaded
// from JSONL or TSV.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "i2cr/errors.hpp"
#include "i2cr/text.hpp"

namespace i2cr {

struct EntityRecord {
  std::string id;
  std::string name;
  std::string description;
  std::vector<std::string> aliases;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

enum class KgFormat { jsonl, tsv };

class KgSnapshot {
 public:
  KgSnapshot() : digest_(text::digest("")) {}

  // Throws DuplicateId on repeated ids and Error on empty id/name.
  explicit KgSnapshot(std::vector<EntityRecord> records)
      : entities_(std::move(records)) {
    std::sort(entities_.begin(), entities_.end(),
              [](const EntityRecord& a, const EntityRecord& b) {
                return a.id < b.id;
              });
    index_.reserve(entities_.size());
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      const auto& e = entities_[i];
      if (e.id.empty()) throw Error("entity with empty id");
      if (e.name.empty()) throw Error("entity '" + e.id + "' has empty name");
      if (!index_.emplace(e.id, i).second) throw DuplicateId(e.id);
    }
    digest_ = text::digest(serialize_jsonl());
  }

  std::size_t size() const { return entities_.size(); }
  bool empty() const { return entities_.empty(); }

  // Ascending id order.
  auto begin() const { return entities_.begin(); }
  auto end() const { return entities_.end(); }
  const std::vector<EntityRecord>& entities() const { return entities_; }

  const EntityRecord* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &entities_[it->second];
  }

  const EntityRecord& at(std::string_view id) const {
    if (const auto* e = find(id)) return *e;
    throw Error("unknown entity id '" + std::string(id) + "'");
  }

  // Digest of the canonical JSONL serialization, so two snapshots with the
  // same records share a digest regardless of source formatting.
  const std::string& source_digest() const { return digest_; }

  std::string serialize_jsonl() const {
    std::string out;
    for (const auto& e : entities_) {
      nlohmann::json j = {{"id", e.id},
                          {"name", e.name},
                          {"description", e.description}};
      if (!e.aliases.empty()) j["aliases"] = e.aliases;
      out += j.dump();
      out.push_back('\n');
    }
    return out;
  }

 private:
  std::vector<EntityRecord> entities_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string digest_;
};

namespace detail {

inline EntityRecord parse_jsonl_line(const std::string& line,
                                     std::size_t lineno) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(lineno, e.what());
  }
  if (!j.is_object()) throw ParseError(lineno, "expected a JSON object");
  auto required = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw ParseError(lineno, std::string("missing string field '") + key +
                                   "'");
    }
    return it->get<std::string>();
  };
  EntityRecord e;
  e.id = required("id");
  e.name = required("name");
  e.description = required("description");
  if (auto it = j.find("aliases"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError(lineno, "'aliases' must be a list");
    for (const auto& a : *it) {
      if (!a.is_string()) throw ParseError(lineno, "alias must be a string");
      e.aliases.push_back(a.get<std::string>());
    }
  }
  return e;
}

inline EntityRecord parse_tsv_line(const std::string& line,
                                   std::size_t lineno) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 3) {
    throw ParseError(lineno, "expected 3 tab-separated fields, got " +
                                 std::to_string(fields.size()));
  }
  return EntityRecord{fields[0], fields[1], fields[2], {}};
}

}  // namespace detail

inline KgSnapshot load_kg(std::istream& in, KgFormat format) {
  std::vector<EntityRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    if (!text::is_valid_utf8(line)) throw ParseError(lineno, "invalid UTF-8");
    auto rec = format == KgFormat::jsonl ? detail::parse_jsonl_line(line, lineno)
                                         : detail::parse_tsv_line(line, lineno);
    if (rec.id.empty()) throw ParseError(lineno, "empty id");
    if (rec.name.empty()) throw ParseError(lineno, "empty name");
    if (!seen.emplace(rec.id, lineno).second) throw DuplicateId(rec.id);
    records.push_back(std::move(rec));
  }
  return KgSnapshot(std::move(records));
}

inline KgSnapshot load_kg(const std::string& path, KgFormat format) {
  std::istringstream in(text::read_file(path));
  return load_kg(in, format);
}

// Picks the format from the extension: ".tsv" is TSV, everything else JSONL.
inline KgFormat kg_format_for_path(std::string_view path) {
  return path.ends_with(".tsv") ? KgFormat::tsv : KgFormat::jsonl;
}

inline std::size_t char_length(std::string_view s) {
  if (auto cps = text::decode_utf8(s)) return cps->size();
  return s.size();
}

}  // namespace i2cr
