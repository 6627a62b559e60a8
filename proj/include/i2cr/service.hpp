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

// Run manifests, the link response payload shared by the CLI and the HTTP
// service, and the service itself (POST /link, GET /healthz).

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <optional>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "i2cr/errors.hpp"
#include "i2cr/pipeline.hpp"
#include "i2cr/text.hpp"
#include "i2cr/trace.hpp"

namespace i2cr {

struct RunManifest {
  nlohmann::json config;
  std::string kg_digest;
  nlohmann::json backends;  // transcript digest or endpoint URLs
  std::string command_line;
  std::string timestamp;

  // Identity of the run's inputs; excludes command line and timestamp.
  std::string digest() const {
    return text::digest(nlohmann::json{{"config", config},
                                       {"kg_digest", kg_digest},
                                       {"backends", backends}}
                            .dump());
  }

  nlohmann::json to_json() const {
    return {{"digest", digest()},       {"config", config},
            {"kg_digest", kg_digest},   {"backends", backends},
            {"command_line", command_line}, {"timestamp", timestamp}};
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json link_payload(const LinkResult& r, bool explain,
                                   const std::string& manifest_digest) {
  nlohmann::json j = {
      {"prediction", r.prediction ? nlohmann::json(*r.prediction)
                                  : nlohmann::json(nullptr)},
      {"topk", r.topk},
      {"manifest", manifest_digest}};
  if (explain) j["trace"] = to_json(r.trace);
  return j;
}

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

class LinkService {
 public:
  LinkService(const Linker& linker, std::string manifest_digest)
      : linker_(linker), manifest_(std::move(manifest_digest)) {}

  // Body: {"mention", "context"?, "image_b64"?, "K"?, "explain"?}
  ServiceResponse handle_link(const std::string& body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return bad_request(std::string("invalid JSON: ") + e.what());
    }
    if (!req.is_object()) return bad_request("body must be a JSON object");
    MentionSample sample;
    std::size_t K = 1;
    bool explain = false;
    try {
      sample.mention = req.at("mention").get<std::string>();
      sample.context = req.value("context", std::string());
      if (auto it = req.find("image_b64"); it != req.end() && !it->is_null()) {
        auto bytes = text::base64_decode(it->get<std::string>());
        if (!bytes) return bad_request("image_b64 is not valid base64");
        sample.image = Image{std::move(*bytes)};
      }
      if (auto it = req.find("K"); it != req.end()) {
        const auto k = it->get<long>();
        if (k < 1) return bad_request("K must be >= 1");
        K = static_cast<std::size_t>(k);
      }
      explain = req.value("explain", false);
    } catch (const nlohmann::json::exception& e) {
      return bad_request(e.what());
    }
    if (sample.mention.empty()) return bad_request("mention must be non-empty");
    try {
      const auto result = linker_.link_topk(sample, K);
      return {200, link_payload(result, explain, manifest_)};
    } catch (const LinkFailure& e) {
      nlohmann::json err = {{"error", e.what()}};
      if (explain) err["trace"] = to_json(e.partial_trace());
      return {e.backend_unavailable() ? 503 : 500, err};
    } catch (const std::exception& e) {
      return {500, {{"error", e.what()}}};
    }
  }

  void mount(httplib::Server& server) const {
    server.Post("/link", [this](const httplib::Request& req,
                                httplib::Response& res) {
      const auto r = handle_link(req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    });
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
  }

 private:
  static ServiceResponse bad_request(std::string msg) {
    return {400, {{"error", std::move(msg)}}};
  }

  const Linker& linker_;
  std::string manifest_;
};

namespace detail {
inline std::atomic<bool> g_shutdown_requested{false};
inline void on_shutdown_signal(int) { g_shutdown_requested = true; }
}  // namespace detail

// Serves until SIGINT/SIGTERM. Returns false if the address cannot be bound.
inline bool serve_until_signal(const LinkService& service,
                               const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  detail::g_shutdown_requested = false;
  std::signal(SIGINT, detail::on_shutdown_signal);
  std::signal(SIGTERM, detail::on_shutdown_signal);
  std::thread watcher([&server] {
    while (!detail::g_shutdown_requested) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
  });
  const bool ok = server.listen(host, port);
  detail::g_shutdown_requested = true;
  watcher.join();
  return ok;
}

}  // namespace i2cr
