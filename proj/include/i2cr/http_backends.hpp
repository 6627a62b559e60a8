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

// Live adapters: JSON over HTTP POST to the five model endpoints, with
// bounded in-flight requests and exponential-backoff retries on transport
// failures and 5xx/429 responses.

#include <chrono>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"

#include "i2cr/backends.hpp"
#include "i2cr/config.hpp"
#include "i2cr/errors.hpp"
#include "i2cr/mock_backends.hpp"
#include "i2cr/text.hpp"

namespace i2cr {

struct HttpOptions {
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_ms = 200;
  int max_concurrency = 8;
};

class HttpEndpoint {
 public:
  HttpEndpoint(std::string base_url, std::string path, HttpOptions opts)
      : base_(std::move(base_url)),
        path_(std::move(path)),
        opts_(opts),
        slots_(std::max(1, opts.max_concurrency)) {
    if (base_.empty()) throw ConfigError("empty backend url for " + path_);
  }

  const std::string& path() const { return path_; }

  // image_route: 415/422 responses mean the service could not decode the
  // image.
  nlohmann::json post(const nlohmann::json& body, bool image_route = false) {
    const std::string payload = body.dump();
    std::string last_error;
    int last_status = 0;
    bool timed_out = false, unreachable = false;
    for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
      if (attempt > 0 && opts_.backoff_ms > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(opts_.backoff_ms << (attempt - 1)));
      }
      httplib::Result res = send(payload);
      if (!res) {
        const auto err = res.error();
        timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                    err == httplib::Error::ConnectionTimeout;
        unreachable = !timed_out;
        last_error = httplib::to_string(err);
        continue;
      }
      timed_out = unreachable = false;
      last_status = res->status;
      if (res->status >= 500 || res->status == 429) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status >= 400) {
        const std::string msg = path_ + ": HTTP " + std::to_string(res->status) +
                                " " + res->body;
        if (image_route && (res->status == 415 || res->status == 422))
          throw ImageDecodeError(msg);
        throw BackendError(msg, res->status);
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw BackendError(path_ + ": malformed JSON response: " + e.what(),
                           res->status);
      }
    }
    const std::string msg = base_ + path_ + ": " + last_error;
    if (timed_out) throw BackendTimeout(msg);
    if (unreachable) throw BackendUnavailable(msg);
    throw BackendError(msg, last_status);
  }

 private:
  httplib::Result send(const std::string& payload) {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    // httplib clients are not thread-safe; one per request.
    httplib::Client cli(base_);
    const auto secs = opts_.timeout_ms / 1000;
    const auto usecs = (opts_.timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    return cli.Post(path_, payload, "application/json");
  }

  std::string base_;
  std::string path_;
  HttpOptions opts_;
  std::counting_semaphore<> slots_;
};

namespace detail {
template <typename T>
T wire_field(const nlohmann::json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(path + ": response field '" + key + "': " + e.what());
  }
}
}  // namespace detail

class HttpSelector : public Selector {
 public:
  HttpSelector(const std::string& url, HttpOptions o)
      : ep_(url, "/v1/select", o) {}
  std::string complete(const SelectorRequest& req) override {
    return detail::wire_field<std::string>(ep_.post(to_json(req)), "text",
                                           ep_.path());
  }

 private:
  HttpEndpoint ep_;
};

// Caches vectors by text, so repeated texts embed identically.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(const std::string& url, HttpOptions o)
      : ep_(url, "/v1/embed", o) {}
  EmbeddingVector embed(const std::string& text) override {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(text); it != cache_.end()) return it->second;
    }
    auto resp = ep_.post({{"texts", {text}}});
    auto vectors = detail::wire_field<std::vector<EmbeddingVector>>(
        resp, "vectors", ep_.path());
    if (vectors.size() != 1)
      throw BackendError("/v1/embed: expected one vector");
    for (double v : vectors[0]) {
      if (!std::isfinite(v)) throw BackendError("/v1/embed: non-finite value");
    }
    guard_.check(vectors[0]);
    std::lock_guard lock(mu_);
    return cache_.emplace(text, std::move(vectors[0])).first->second;
  }

 private:
  HttpEndpoint ep_;
  detail::DimensionGuard guard_;
  std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

class HttpCrossModalScorer : public CrossModalScorer {
 public:
  HttpCrossModalScorer(const std::string& url, HttpOptions o)
      : ep_(url, "/v1/xmodal", o) {}
  double cross_modal_score(const std::string& text,
                           const Image& image) override {
    if (image.bytes.empty()) throw ImageDecodeError("empty image");
    const auto resp = ep_.post(
        {{"text", text}, {"image_b64", text::base64_encode(image.bytes)}}, true);
    const auto s = detail::wire_field<double>(resp, "score", ep_.path());
    if (!std::isfinite(s)) throw BackendError("/v1/xmodal: non-finite score");
    return s;
  }

 private:
  HttpEndpoint ep_;
};

class HttpClueExtractor : public ClueExtractor {
 public:
  HttpClueExtractor(const std::string& url, HttpOptions o)
      : ep_(url, "/v1/i2t", o) {}
  VisualClue extract_visual_clue(const Image& image, ClueKind kind) override {
    if (image.bytes.empty()) throw ImageDecodeError("empty image");
    const auto resp = ep_.post({{"image_b64", text::base64_encode(image.bytes)},
                                {"kind", to_string(kind)}},
                               true);
    return {kind, detail::wire_field<std::string>(resp, "text", ep_.path())};
  }

 private:
  HttpEndpoint ep_;
};

class HttpSummarizer : public Summarizer {
 public:
  HttpSummarizer(const std::string& url, HttpOptions o)
      : ep_(url, "/v1/summarize", o) {}
  std::string summarize(const std::string& text,
                        std::size_t max_chars) override {
    const auto resp = ep_.post({{"text", text}, {"max_chars", max_chars}});
    return detail::wire_field<std::string>(resp, "text", ep_.path());
  }

 private:
  HttpEndpoint ep_;
};

// Roles without a configured URL are left null.
inline Backends make_http_backends(const BackendSettings& s) {
  const HttpOptions o{s.timeout_ms, s.max_attempts, s.backoff_ms,
                      s.max_concurrency};
  Backends b;
  if (auto u = s.url_for(s.selector_url); !u.empty())
    b.selector = std::make_shared<HttpSelector>(u, o);
  if (auto u = s.url_for(s.embed_url); !u.empty())
    b.embedder = std::make_shared<HttpEmbedder>(u, o);
  if (auto u = s.url_for(s.xmodal_url); !u.empty())
    b.xmodal = std::make_shared<HttpCrossModalScorer>(u, o);
  if (auto u = s.url_for(s.i2t_url); !u.empty())
    b.extractor = std::make_shared<HttpClueExtractor>(u, o);
  if (auto u = s.url_for(s.summarize_url); !u.empty())
    b.summarizer = std::make_shared<HttpSummarizer>(u, o);
  return b;
}

}  // namespace i2cr
