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

// One interface per model role the pipeline consumes: entity selector,
// text embedder, cross-modal scorer, image-to-text clue extractor and
// description summarizer. Adapters live in mock_backends.hpp and
// http_backends.hpp.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "i2cr/errors.hpp"
#include "i2cr/kg_store.hpp"
#include "i2cr/text.hpp"

namespace i2cr {

struct Image {
  std::string bytes;

  std::string digest() const { return text::digest(bytes); }
  friend bool operator==(const Image&, const Image&) = default;
};

enum class ClueKind { ocr, cap, den, tag };

inline constexpr std::array<ClueKind, 4> kAllClueKinds = {
    ClueKind::ocr, ClueKind::cap, ClueKind::den, ClueKind::tag};

inline std::string to_string(ClueKind k) {
  switch (k) {
    case ClueKind::ocr: return "ocr";
    case ClueKind::cap: return "cap";
    case ClueKind::den: return "den";
    case ClueKind::tag: return "tag";
  }
  return "?";
}

inline std::optional<ClueKind> parse_clue_kind(std::string_view s) {
  const auto lower = text::ascii_lower(text::trim(s));
  for (auto k : kAllClueKinds) {
    if (lower == to_string(k)) return k;
  }
  return std::nullopt;
}

// Upper-case label used when a clue is rendered into a prompt or context.
inline std::string clue_label(ClueKind k) {
  std::string s = to_string(k);
  for (auto& c : s) c = static_cast<char>(c - 'a' + 'A');
  return s;
}

struct VisualClue {
  ClueKind kind;
  std::string text;

  friend bool operator==(const VisualClue&, const VisualClue&) = default;
};

struct CandidateText {
  std::string name;
  std::string description;
};

inline constexpr double kDefaultTemperature = 0.9;

struct SelectorRequest {
  std::string instruction;
  std::string mention;
  std::string context;
  std::vector<VisualClue> visual_clues;
  std::vector<CandidateText> candidates;
  double temperature = kDefaultTemperature;
};

// choice is nullopt for NIL; otherwise index into the request's candidates.
struct SelectorResponse {
  std::optional<std::size_t> choice;
  std::string raw_text;

  bool is_nil() const { return !choice.has_value(); }
};

using EmbeddingVector = std::vector<double>;

// ---------------------------------------------------------------------------
// Wire shapes, shared by the HTTP adapter and the mock transcript.

inline nlohmann::json clues_to_json(const std::vector<VisualClue>& clues) {
  auto arr = nlohmann::json::array();
  for (const auto& c : clues) {
    arr.push_back({{"kind", to_string(c.kind)}, {"text", c.text}});
  }
  return arr;
}

inline nlohmann::json to_json(const SelectorRequest& req) {
  auto cands = nlohmann::json::array();
  for (const auto& c : req.candidates) {
    cands.push_back({{"name", c.name}, {"description", c.description}});
  }
  return {{"instruction", req.instruction},
          {"mention", req.mention},
          {"context", req.context},
          {"clues", clues_to_json(req.visual_clues)},
          {"candidates", cands},
          {"temperature", req.temperature}};
}

// Canonical request fingerprints: a hash of the semantic fields only, so
// transcripts survive changes to the wire encoding.
namespace fingerprint {

inline std::string of(std::string_view role, const nlohmann::json& fields) {
  std::string canon(role);
  canon.push_back('\n');
  canon += fields.dump();  // object keys are emitted sorted
  return text::digest(canon);
}

inline std::string select(const SelectorRequest& req) {
  return of("select", to_json(req));
}
inline std::string embed(std::string_view text) {
  return of("embed", {{"text", text}});
}
inline std::string xmodal(std::string_view text, const Image& image) {
  return of("xmodal", {{"text", text}, {"image", image.digest()}});
}
inline std::string i2t(const Image& image, ClueKind kind) {
  return of("i2t", {{"image", image.digest()}, {"kind", to_string(kind)}});
}
inline std::string summarize(std::string_view text, std::size_t max_chars) {
  return of("summarize", {{"text", text}, {"max_chars", max_chars}});
}

}  // namespace fingerprint

// Maps raw model output onto a candidate: exact trimmed match first, then
// the literal "nil" (any case), then a case-insensitive match. Duplicate
// names resolve to the earliest (highest lexical rank) candidate.
inline SelectorResponse parse_selector_response(std::string raw,
                                                const SelectorRequest& req) {
  const std::string answer = text::trim(raw);
  for (std::size_t i = 0; i < req.candidates.size(); ++i) {
    if (text::trim(req.candidates[i].name) == answer) {
      return {i, std::move(raw)};
    }
  }
  const std::string lowered = text::ascii_lower(answer);
  if (lowered == "nil") return {std::nullopt, std::move(raw)};
  for (std::size_t i = 0; i < req.candidates.size(); ++i) {
    if (text::ascii_lower(text::trim(req.candidates[i].name)) == lowered) {
      return {i, std::move(raw)};
    }
  }
  throw Unparseable(std::move(raw));
}

// ---------------------------------------------------------------------------
// Role interfaces. Implementations must be safe to call concurrently.

class Selector {
 public:
  virtual ~Selector() = default;

  SelectorResponse select_entity(const SelectorRequest& req) {
    return parse_selector_response(complete(req), req);
  }

  // Raw model text for one request.
  virtual std::string complete(const SelectorRequest& req) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
};

class CrossModalScorer {
 public:
  virtual ~CrossModalScorer() = default;
  // 100 x cosine(text embedding, image embedding).
  virtual double cross_modal_score(const std::string& text,
                                   const Image& image) = 0;
};

class ClueExtractor {
 public:
  virtual ~ClueExtractor() = default;
  virtual VisualClue extract_visual_clue(const Image& image,
                                         ClueKind kind) = 0;
};

class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual std::string summarize(const std::string& text,
                                std::size_t max_chars) = 0;
};

struct Backends {
  std::shared_ptr<Selector> selector;
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<CrossModalScorer> xmodal;
  std::shared_ptr<ClueExtractor> extractor;
  std::shared_ptr<Summarizer> summarizer;
};

// ---------------------------------------------------------------------------

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Dot product of the two L2-normalized vectors, clamped to [-1, 1].
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateEmbedding();
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// Cross-modal scorer over a pair of encoders sharing one embedding space
// (CLIP-style); the score is 100 x cosine.
class DualEncoderScorer : public CrossModalScorer {
 public:
  using TextEncoder = std::function<EmbeddingVector(const std::string&)>;
  using ImageEncoder = std::function<EmbeddingVector(const Image&)>;

  DualEncoderScorer(TextEncoder text, ImageEncoder image)
      : text_(std::move(text)), image_(std::move(image)) {}

  double cross_modal_score(const std::string& text,
                           const Image& image) override {
    if (image.bytes.empty()) throw ImageDecodeError("empty image");
    return 100.0 * cosine(text_(text), image_(image));
  }

 private:
  TextEncoder text_;
  ImageEncoder image_;
};

// Replaces every description longer than max_chars (in code points) with
// the summarizer's output. Returns a new snapshot; the input is untouched.
inline KgSnapshot summarize_descriptions(const KgSnapshot& kg,
                                         Summarizer& summarizer,
                                         std::size_t max_chars) {
  if (max_chars == 0) throw Error("max_chars must be positive");
  std::vector<EntityRecord> out(kg.begin(), kg.end());
  std::size_t completed = 0;
  for (auto& e : out) {
    if (char_length(e.description) <= max_chars) continue;
    try {
      e.description = summarizer.summarize(e.description, max_chars);
    } catch (const Error& err) {
      throw SummarizationError(e.id, completed, err.what());
    }
    ++completed;
  }
  return KgSnapshot(std::move(out));
}

}  // namespace i2cr
