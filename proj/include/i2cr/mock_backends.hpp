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

// Deterministic backends: a JSONL transcript keyed by request fingerprint,
// mock adapters that replay it, recording adapters that capture it from
// any other backend, and callback adapters for in-process models.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>

#include "json.hpp"

#include "i2cr/backends.hpp"
#include "i2cr/errors.hpp"
#include "i2cr/text.hpp"

namespace i2cr {

// Role names as they appear in transcript files.
namespace role {
inline constexpr const char* kSelect = "select";
inline constexpr const char* kEmbed = "embed";
inline constexpr const char* kXmodal = "xmodal";
inline constexpr const char* kI2t = "i2t";
inline constexpr const char* kSummarize = "summarize";
}  // namespace role

class Transcript {
 public:
  Transcript() = default;
  Transcript(const Transcript& o) : entries_(o.snapshot()) {}
  Transcript(Transcript&& o) noexcept {
    std::unique_lock lock(o.mu_);
    entries_ = std::move(o.entries_);
  }
  Transcript& operator=(Transcript o) {
    std::unique_lock lock(mu_);
    entries_ = std::move(o.entries_);
    return *this;
  }

  static Transcript parse(std::string_view jsonl) {
    Transcript t;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        t.add(j.at("role").get<std::string>(),
              j.at("request_fingerprint").get<std::string>(),
              j.at("response"));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(lineno, e.what());
      }
    }
    return t;
  }

  static Transcript load(const std::string& path) {
    return parse(text::read_file(path));
  }

  // Adding an identical entry twice is a no-op; a conflicting response for
  // the same request means the recorded backend was not deterministic.
  void add(const std::string& role, const std::string& fp,
           nlohmann::json response) {
    std::unique_lock lock(mu_);
    auto [it, inserted] =
        entries_.try_emplace(Key{role, fp}, std::move(response));
    if (!inserted && it->second != response) {
      throw Error("conflicting transcript entry for " + role + "/" + fp);
    }
  }

  std::optional<nlohmann::json> find(const std::string& role,
                                     const std::string& fp) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(Key{role, fp});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  // Sorted by (role, fingerprint) so equal transcripts serialize equally.
  std::string serialize() const {
    std::shared_lock lock(mu_);
    std::string out;
    for (const auto& [key, resp] : entries_) {
      nlohmann::json j = {{"role", key.first},
                          {"request_fingerprint", key.second},
                          {"response", resp}};
      out += j.dump();
      out.push_back('\n');
    }
    return out;
  }

  void save(const std::string& path) const {
    text::write_file(path, serialize());
  }

  std::string digest() const { return text::digest(serialize()); }

  void merge(const Transcript& other) {
    for (const auto& [key, resp] : other.snapshot()) {
      add(key.first, key.second, resp);
    }
  }

 private:
  using Key = std::pair<std::string, std::string>;

  std::map<Key, nlohmann::json> snapshot() const {
    std::shared_lock lock(mu_);
    return entries_;
  }

  mutable std::shared_mutex mu_;
  std::map<Key, nlohmann::json> entries_;
};

// strict: a missing entry raises MockMiss. lenient: role defaults
// (selector -> first candidate, embed -> zero vector, xmodal -> 0,
// i2t -> "", summarize -> input unchanged).
enum class MockMode { strict, lenient };

namespace detail {

template <typename T>
T response_field(const nlohmann::json& resp, const char* key,
                 const char* role) {
  try {
    return resp.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed ") + role +
                       " response: " + e.what());
  }
}

inline EmbeddingVector first_vector(const nlohmann::json& resp) {
  auto vectors =
      response_field<std::vector<EmbeddingVector>>(resp, "vectors", "embed");
  if (vectors.size() != 1) {
    throw BackendError("embed response must carry exactly one vector");
  }
  for (double v : vectors[0]) {
    if (!std::isfinite(v)) throw BackendError("non-finite embedding value");
  }
  return std::move(vectors[0]);
}

// Fixes the dimension on first use and enforces it afterwards.
class DimensionGuard {
 public:
  explicit DimensionGuard(std::size_t dim = 0) : dim_(dim) {}
  void check(const EmbeddingVector& v) {
    std::lock_guard lock(mu_);
    if (dim_ == 0) {
      dim_ = v.size();
    } else if (v.size() != dim_) {
      throw DimensionMismatch(dim_, v.size());
    }
  }
  std::size_t dimension() const {
    std::lock_guard lock(mu_);
    return dim_;
  }

 private:
  mutable std::mutex mu_;
  std::size_t dim_;
};

}  // namespace detail

class MockSelector : public Selector {
 public:
  MockSelector(std::shared_ptr<const Transcript> t, MockMode mode)
      : t_(std::move(t)), mode_(mode) {}

  std::string complete(const SelectorRequest& req) override {
    const auto fp = fingerprint::select(req);
    if (auto resp = t_->find(role::kSelect, fp)) {
      return detail::response_field<std::string>(*resp, "text", "select");
    }
    if (mode_ == MockMode::strict) throw MockMiss(role::kSelect, fp);
    return req.candidates.empty() ? "nil" : req.candidates.front().name;
  }

 private:
  std::shared_ptr<const Transcript> t_;
  MockMode mode_;
};

class MockEmbedder : public Embedder {
 public:
  MockEmbedder(std::shared_ptr<const Transcript> t, MockMode mode,
               std::size_t lenient_dimension = 1)
      : t_(std::move(t)), mode_(mode), lenient_dim_(lenient_dimension) {}

  EmbeddingVector embed(const std::string& text) override {
    const auto fp = fingerprint::embed(text);
    if (auto resp = t_->find(role::kEmbed, fp)) {
      auto v = detail::first_vector(*resp);
      guard_.check(v);
      return v;
    }
    if (mode_ == MockMode::strict) throw MockMiss(role::kEmbed, fp);
    const auto dim = guard_.dimension();
    return EmbeddingVector(dim ? dim : lenient_dim_, 0.0);
  }

 private:
  std::shared_ptr<const Transcript> t_;
  MockMode mode_;
  std::size_t lenient_dim_;
  detail::DimensionGuard guard_;
};

class MockCrossModalScorer : public CrossModalScorer {
 public:
  MockCrossModalScorer(std::shared_ptr<const Transcript> t, MockMode mode)
      : t_(std::move(t)), mode_(mode) {}

  double cross_modal_score(const std::string& text,
                           const Image& image) override {
    const auto fp = fingerprint::xmodal(text, image);
    if (auto resp = t_->find(role::kXmodal, fp)) {
      const auto score =
          detail::response_field<double>(*resp, "score", "xmodal");
      if (!std::isfinite(score)) throw BackendError("non-finite score");
      return score;
    }
    if (mode_ == MockMode::strict) throw MockMiss(role::kXmodal, fp);
    return 0.0;
  }

 private:
  std::shared_ptr<const Transcript> t_;
  MockMode mode_;
};

class MockClueExtractor : public ClueExtractor {
 public:
  MockClueExtractor(std::shared_ptr<const Transcript> t, MockMode mode)
      : t_(std::move(t)), mode_(mode) {}

  VisualClue extract_visual_clue(const Image& image, ClueKind kind) override {
    const auto fp = fingerprint::i2t(image, kind);
    if (auto resp = t_->find(role::kI2t, fp)) {
      return {kind, detail::response_field<std::string>(*resp, "text", "i2t")};
    }
    if (mode_ == MockMode::strict) throw MockMiss(role::kI2t, fp);
    return {kind, ""};
  }

 private:
  std::shared_ptr<const Transcript> t_;
  MockMode mode_;
};

class MockSummarizer : public Summarizer {
 public:
  MockSummarizer(std::shared_ptr<const Transcript> t, MockMode mode)
      : t_(std::move(t)), mode_(mode) {}

  std::string summarize(const std::string& text,
                        std::size_t max_chars) override {
    const auto fp = fingerprint::summarize(text, max_chars);
    if (auto resp = t_->find(role::kSummarize, fp)) {
      return detail::response_field<std::string>(*resp, "text", "summarize");
    }
    if (mode_ == MockMode::strict) throw MockMiss(role::kSummarize, fp);
    return text;
  }

 private:
  std::shared_ptr<const Transcript> t_;
  MockMode mode_;
};

inline Backends make_mock_backends(std::shared_ptr<const Transcript> t,
                                   MockMode mode = MockMode::strict) {
  return Backends{std::make_shared<MockSelector>(t, mode),
                  std::make_shared<MockEmbedder>(t, mode),
                  std::make_shared<MockCrossModalScorer>(t, mode),
                  std::make_shared<MockClueExtractor>(t, mode),
                  std::make_shared<MockSummarizer>(t, mode)};
}

// ---------------------------------------------------------------------------
// Callback adapters.

class FunctionSelector : public Selector {
 public:
  using Fn = std::function<std::string(const SelectorRequest&)>;
  explicit FunctionSelector(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const SelectorRequest& req) override {
    return fn_(req);
  }

 private:
  Fn fn_;
};

class FunctionEmbedder : public Embedder {
 public:
  using Fn = std::function<EmbeddingVector(const std::string&)>;
  explicit FunctionEmbedder(Fn fn) : fn_(std::move(fn)) {}
  EmbeddingVector embed(const std::string& text) override {
    auto v = fn_(text);
    guard_.check(v);
    return v;
  }

 private:
  Fn fn_;
  detail::DimensionGuard guard_;
};

class FunctionCrossModalScorer : public CrossModalScorer {
 public:
  using Fn = std::function<double(const std::string&, const Image&)>;
  explicit FunctionCrossModalScorer(Fn fn) : fn_(std::move(fn)) {}
  double cross_modal_score(const std::string& text,
                           const Image& image) override {
    return fn_(text, image);
  }

 private:
  Fn fn_;
};

class FunctionClueExtractor : public ClueExtractor {
 public:
  using Fn = std::function<std::string(const Image&, ClueKind)>;
  explicit FunctionClueExtractor(Fn fn) : fn_(std::move(fn)) {}
  VisualClue extract_visual_clue(const Image& image, ClueKind kind) override {
    return {kind, fn_(image, kind)};
  }

 private:
  Fn fn_;
};

class FunctionSummarizer : public Summarizer {
 public:
  using Fn = std::function<std::string(const std::string&, std::size_t)>;
  explicit FunctionSummarizer(Fn fn) : fn_(std::move(fn)) {}
  std::string summarize(const std::string& text,
                        std::size_t max_chars) override {
    return fn_(text, max_chars);
  }

 private:
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Recording adapters: forward to `inner` and append every response to the
// transcript. Errors are not recorded.

class RecordingSelector : public Selector {
 public:
  RecordingSelector(std::shared_ptr<Selector> inner,
                    std::shared_ptr<Transcript> t)
      : inner_(std::move(inner)), t_(std::move(t)) {}
  std::string complete(const SelectorRequest& req) override {
    auto raw = inner_->complete(req);
    t_->add(role::kSelect, fingerprint::select(req), {{"text", raw}});
    return raw;
  }

 private:
  std::shared_ptr<Selector> inner_;
  std::shared_ptr<Transcript> t_;
};

class RecordingEmbedder : public Embedder {
 public:
  RecordingEmbedder(std::shared_ptr<Embedder> inner,
                    std::shared_ptr<Transcript> t)
      : inner_(std::move(inner)), t_(std::move(t)) {}
  EmbeddingVector embed(const std::string& text) override {
    auto v = inner_->embed(text);
    t_->add(role::kEmbed, fingerprint::embed(text),
            {{"vectors", std::vector<EmbeddingVector>{v}}});
    return v;
  }

 private:
  std::shared_ptr<Embedder> inner_;
  std::shared_ptr<Transcript> t_;
};

class RecordingCrossModalScorer : public CrossModalScorer {
 public:
  RecordingCrossModalScorer(std::shared_ptr<CrossModalScorer> inner,
                            std::shared_ptr<Transcript> t)
      : inner_(std::move(inner)), t_(std::move(t)) {}
  double cross_modal_score(const std::string& text,
                           const Image& image) override {
    const double s = inner_->cross_modal_score(text, image);
    t_->add(role::kXmodal, fingerprint::xmodal(text, image), {{"score", s}});
    return s;
  }

 private:
  std::shared_ptr<CrossModalScorer> inner_;
  std::shared_ptr<Transcript> t_;
};

class RecordingClueExtractor : public ClueExtractor {
 public:
  RecordingClueExtractor(std::shared_ptr<ClueExtractor> inner,
                         std::shared_ptr<Transcript> t)
      : inner_(std::move(inner)), t_(std::move(t)) {}
  VisualClue extract_visual_clue(const Image& image, ClueKind kind) override {
    auto clue = inner_->extract_visual_clue(image, kind);
    t_->add(role::kI2t, fingerprint::i2t(image, kind), {{"text", clue.text}});
    return clue;
  }

 private:
  std::shared_ptr<ClueExtractor> inner_;
  std::shared_ptr<Transcript> t_;
};

class RecordingSummarizer : public Summarizer {
 public:
  RecordingSummarizer(std::shared_ptr<Summarizer> inner,
                      std::shared_ptr<Transcript> t)
      : inner_(std::move(inner)), t_(std::move(t)) {}
  std::string summarize(const std::string& text,
                        std::size_t max_chars) override {
    auto s = inner_->summarize(text, max_chars);
    t_->add(role::kSummarize, fingerprint::summarize(text, max_chars),
            {{"text", s}});
    return s;
  }

 private:
  std::shared_ptr<Summarizer> inner_;
  std::shared_ptr<Transcript> t_;
};

// Wraps whichever roles are set in `inner`.
inline Backends make_recording_backends(const Backends& inner,
                                        std::shared_ptr<Transcript> t) {
  Backends out;
  if (inner.selector)
    out.selector = std::make_shared<RecordingSelector>(inner.selector, t);
  if (inner.embedder)
    out.embedder = std::make_shared<RecordingEmbedder>(inner.embedder, t);
  if (inner.xmodal)
    out.xmodal = std::make_shared<RecordingCrossModalScorer>(inner.xmodal, t);
  if (inner.extractor)
    out.extractor =
        std::make_shared<RecordingClueExtractor>(inner.extractor, t);
  if (inner.summarizer)
    out.summarizer = std::make_shared<RecordingSummarizer>(inner.summarizer, t);
  return out;
}

}  // namespace i2cr
