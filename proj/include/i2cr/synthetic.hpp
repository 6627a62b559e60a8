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

// Synthetic steering corpus. Every sample has a gold entity and a
// same-surname distractor that ranks first lexically. A fixed share of
// samples is resolvable from text alone; each remaining sample names one
// clue kind that the selector needs before it picks the gold entity.
// Scripted backends encode this and can be recorded into a transcript.

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "i2cr/backends.hpp"
#include "i2cr/evaluation.hpp"
#include "i2cr/kg_store.hpp"
#include "i2cr/mock_backends.hpp"
#include "i2cr/pipeline.hpp"

namespace i2cr::synthetic {

struct SampleSpec {
  std::string mention;
  std::string gold_id;
  std::string distractor_id;
  std::optional<ClueKind> needs;  // nullopt: text alone suffices
};

struct SteeringFixture {
  KgSnapshot kg;
  std::vector<MentionSample> dataset;
  std::vector<SampleSpec> specs;
  Backends scripted;
};

inline constexpr std::array<const char*, 10> kSurnames = {
    "Thorne", "Okafor", "Lindqvist", "Marchetti", "Haddad",
    "Novak",  "Sato",   "Ferreira",  "Kowalski",  "Brennan"};

inline std::string clue_text_for(ClueKind k) {
  switch (k) {
    case ClueKind::ocr: return "MUSIC";
    case ClueKind::cap: return "a singer performing on a stage";
    case ClueKind::den: return "microphone held by a woman; stage lights";
    case ClueKind::tag: return "person; microphone; concert";
  }
  return "";
}

inline std::string image_bytes_for(std::size_t i) {
  return "synthetic-image-" + std::to_string(i);
}

// n samples; sample i needs no clue when i % 10 < 6, otherwise clue kind
// (i % 10) - 6 in ocr, cap, den, tag order.
inline SteeringFixture make_steering_fixture(std::size_t n = 200) {
  SteeringFixture f;
  std::vector<EntityRecord> entities;
  std::map<std::string, std::size_t> by_mention;
  std::map<std::string, std::size_t> by_image;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string surname = kSurnames[i % kSurnames.size()];
    const std::string mention = surname + " " + std::to_string(100 + i);
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "s%04zu", i);
    SampleSpec spec{mention, std::string(idbuf) + "-g", std::string(idbuf) + "-a",
                    std::nullopt};
    if (i % 10 >= 6) spec.needs = kAllClueKinds[i % 10 - 6];
    entities.push_back({spec.distractor_id, mention + " (actress)",
                        "Actress known for stage and screen roles, entry " +
                            std::to_string(i) + ".",
                        {}});
    entities.push_back({spec.gold_id, mention + " (singer)",
                        "Singer and songwriter who tours with a band, entry " +
                            std::to_string(i) + ".",
                        {mention}});
    MentionSample s;
    s.mention = mention;
    s.context = mention + " appeared at the festival last weekend.";
    s.image = Image{image_bytes_for(i)};
    s.gold_id = spec.gold_id;
    by_mention[mention] = i;
    by_image[image_bytes_for(i)] = i;
    f.dataset.push_back(std::move(s));
    f.specs.push_back(std::move(spec));
  }
  f.kg = KgSnapshot(std::move(entities));

  auto specs = std::make_shared<std::vector<SampleSpec>>(f.specs);
  auto kg = std::make_shared<KgSnapshot>(f.kg);

  auto selector = [specs, by_mention](const SelectorRequest& req) -> std::string {
    const auto it = by_mention.find(req.mention);
    if (it == by_mention.end()) return "nil";
    const auto& spec = (*specs)[it->second];
    bool has_clue = !spec.needs;
    for (const auto& c : req.visual_clues) {
      if (spec.needs && c.kind == *spec.needs) has_clue = true;
    }
    const std::string want = req.mention + (has_clue ? " (singer)" : " (actress)");
    for (const auto& c : req.candidates) {
      if (c.name == want) return c.name;
    }
    return "nil";
  };
  // Near-parallel vectors: every selection clears the consistency gate.
  auto embedder = [](const std::string& text) -> EmbeddingVector {
    const double h = static_cast<double>(text::fnv1a64(text) % 1000) / 1000.0;
    return {1.0, 0.1 * h};
  };
  auto xmodal = [](const std::string& description, const Image& image) {
    const auto seed = text::fnv1a64(image.bytes) % 5;
    const bool singer = description.starts_with("Singer");
    return singer ? 35.0 + static_cast<double>(seed)
                  : 8.0 + static_cast<double>(seed);
  };
  auto extractor = [by_image, specs](const Image& image, ClueKind kind) {
    const auto it = by_image.find(image.bytes);
    if (it == by_image.end()) throw ImageDecodeError("unknown image");
    const auto& spec = (*specs)[it->second];
    if (spec.needs && *spec.needs == kind) return clue_text_for(kind);
    return std::string(kind == ClueKind::ocr ? "" : "a person");
  };
  f.scripted = Backends{
      std::make_shared<FunctionSelector>(selector),
      std::make_shared<FunctionEmbedder>(embedder),
      std::make_shared<FunctionCrossModalScorer>(xmodal),
      std::make_shared<FunctionClueExtractor>(extractor),
      std::make_shared<FunctionSummarizer>(
          [](const std::string& t, std::size_t max_chars) {
            return t.substr(0, max_chars);
          })};
  return f;
}

// Configurations the steering experiments evaluate: full pipeline, module
// ablations, round caps, every clue order and all-at-once injection.
inline std::vector<PipelineConfig> steering_configs(const PipelineConfig& base) {
  std::vector<PipelineConfig> out;
  for (const char* label : {"full", "w/o b", "w/o c", "w/o d", "w/o bcd",
                            "all-at-once"}) {
    PipelineConfig c = base;
    ConfigDelta::parse(label).apply(c);
    out.push_back(c);
  }
  for (std::size_t r = 1; r <= base.clue_order.size(); ++r) {
    PipelineConfig c = base;
    c.clue_order.resize(r - 1);
    c.enabled_clue_kinds = c.clue_order;
    out.push_back(c);
  }
  auto order = base.clue_order;
  std::sort(order.begin(), order.end());
  do {
    PipelineConfig c = base;
    c.clue_order = order;
    out.push_back(c);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

// Runs every config through recording wrappers around the scripted
// backends and returns the captured transcript.
inline std::shared_ptr<Transcript> record_transcript(
    const SteeringFixture& f, const std::vector<PipelineConfig>& configs,
    std::size_t K = 5) {
  auto t = std::make_shared<Transcript>();
  const auto rec = make_recording_backends(f.scripted, t);
  EvalOptions opts;
  opts.ks = {1, K};
  for (const auto& c : configs) run_eval(f.dataset, f.kg, rec, c, opts);
  return t;
}

// Writes kg.jsonl, dataset.jsonl, images/ and transcript.jsonl.
inline void write_fixture(const SteeringFixture& f, const Transcript& t,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  text::write_file((dir / "kg.jsonl").string(), f.kg.serialize_jsonl());
  std::string ds;
  for (std::size_t i = 0; i < f.dataset.size(); ++i) {
    const auto& s = f.dataset[i];
    const std::string img = "images/" + std::to_string(i) + ".bin";
    text::write_file((dir / img).string(), s.image->bytes);
    nlohmann::json j = {{"mention", s.mention},
                        {"context", s.context},
                        {"image", img},
                        {"gold_id", *s.gold_id}};
    ds += j.dump() + "\n";
  }
  text::write_file((dir / "dataset.jsonl").string(), ds);
  t.save((dir / "transcript.jsonl").string());
}

}  // namespace i2cr::synthetic
