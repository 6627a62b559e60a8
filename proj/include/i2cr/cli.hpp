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

// `i2cr link|eval|export-instructions|serve`. Exit codes: 0 success,
// 1 runtime failure, 2 usage or configuration error, 3 backend failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "i2cr/config.hpp"
#include "i2cr/dataset.hpp"
#include "i2cr/evaluation.hpp"
#include "i2cr/http_backends.hpp"
#include "i2cr/instruction_data.hpp"
#include "i2cr/kg_store.hpp"
#include "i2cr/mock_backends.hpp"
#include "i2cr/pipeline.hpp"
#include "i2cr/service.hpp"

namespace i2cr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBackend = 3;

struct CommonArgs {
  std::string kg;
  std::string config;
  std::string transcript;
  std::vector<std::string> settings;  // key=value
};

// Everything a command needs once flags, config and inputs are resolved.
struct Session {
  RunConfig config;
  std::shared_ptr<const KgSnapshot> kg;
  Backends backends;
  RunManifest manifest;
};

inline KeyValues parse_settings(const std::vector<std::string>& settings) {
  KeyValues out;
  for (const auto& s : settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(text::trim(s.substr(0, eq)), text::trim(s.substr(eq + 1)));
  }
  return out;
}

inline Session open_session(const CommonArgs& args, const KeyValues& flag_layer,
                            const std::string& command_line) {
  Session s;
  std::vector<KeyValues> layers;
  if (!args.config.empty()) layers.push_back(load_config_file(args.config));
  layers.push_back(env_overrides());
  layers.push_back(parse_settings(args.settings));
  layers.push_back(flag_layer);
  s.config = build_config(layers);

  KgSnapshot kg = load_kg(args.kg, kg_format_for_path(args.kg));

  nlohmann::json backend_desc;
  if (!args.transcript.empty()) {
    auto t = std::make_shared<Transcript>(Transcript::load(args.transcript));
    backend_desc = {{"mock_transcript", t->digest()},
                    {"mode", s.config.backends.mock_mode == MockMode::strict
                                 ? "strict"
                                 : "lenient"}};
    s.backends = make_mock_backends(t, s.config.backends.mock_mode);
  } else {
    const auto& b = s.config.backends;
    backend_desc = {{"select", b.url_for(b.selector_url)},
                    {"embed", b.url_for(b.embed_url)},
                    {"xmodal", b.url_for(b.xmodal_url)},
                    {"i2t", b.url_for(b.i2t_url)},
                    {"summarize", b.url_for(b.summarize_url)}};
    s.backends = make_http_backends(b);
  }
  if (s.config.summarize) {
    if (!s.backends.summarizer)
      throw ConfigError("summarize enabled but no summarizer backend");
    kg = summarize_descriptions(kg, *s.backends.summarizer,
                                s.config.max_description_chars);
  }
  s.kg = std::make_shared<const KgSnapshot>(std::move(kg));
  s.manifest = RunManifest{s.config.to_json(), s.kg->source_digest(),
                           backend_desc, command_line, utc_timestamp()};
  return s;
}

inline void write_manifest(const RunManifest& m, const std::string& path) {
  text::write_file(path, m.to_json().dump(2) + "\n");
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& argv) {
    CLI::App app{"Multimodal entity linking with intra- and inter-modal "
                 "reflection",
                 "i2cr"};
    app.require_subcommand(1);
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (i) command_line_ += ' ';
      command_line_ += argv[i];
    }

    auto add_common = [this](CLI::App* sub, bool need_kg = true) {
      auto* kg = sub->add_option("--kg", common_.kg, "KG snapshot (.jsonl or .tsv)");
      if (need_kg) kg->required();
      sub->add_option("--config", common_.config, "config file (key = value)");
      sub->add_option("--mock-transcript", common_.transcript,
                      "replay backends from a transcript instead of HTTP");
      sub->add_option("--set", common_.settings, "override a config key (key=value)");
    };

    auto* link = app.add_subcommand("link", "link one mention or a sample file");
    add_common(link);
    link->add_option("--mention", mention_, "mention string");
    link->add_option("--context", context_, "textual context");
    link->add_option("--image", image_, "image file");
    link->add_option("--dataset", dataset_, "sample JSONL (one result per line)");
    link->add_option("--K", link_k_, "size of the ranked list")->check(CLI::PositiveNumber);
    link->add_flag("--explain", explain_, "include the event trace");

    auto* eval = app.add_subcommand("eval", "evaluate a dataset");
    add_common(eval);
    eval->add_option("--dataset", dataset_, "dataset JSONL")->required();
    eval->add_option("--ablate", ablate_, "';'-separated ablation labels, e.g. \"full;w/o b;w/o ocr,cap\"");
    eval->add_option("--sweep", sweep_, "rounds | orders")->check(CLI::IsMember({"rounds", "orders"}));
    eval->add_option("--K", eval_k_, "comma-separated K list");
    eval->add_option("--out", out_dir_, "output directory")->required();

    auto* exp = app.add_subcommand("export-instructions",
                                   "write the selector instruction dataset");
    add_common(exp);
    exp->add_option("--dataset", dataset_, "training split JSONL")->required();
    exp->add_option("--out", out_file_, "output JSONL")->required();

    auto* serve = app.add_subcommand("serve", "HTTP linking service");
    add_common(serve);
    serve->add_option("--listen", listen_, "host:port");

    std::vector<std::string> args(argv.rbegin(), argv.rend());
    if (!args.empty()) args.pop_back();  // program name
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitUsage;
    }

    try {
      if (link->parsed()) return cmd_link();
      if (eval->parsed()) return cmd_eval();
      if (exp->parsed()) return cmd_export();
      if (serve->parsed()) return cmd_serve();
    } catch (const ConfigError& e) {
      err_ << "config error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const LinkFailure& e) {
      err_ << "link failed: " << e.what() << "\n";
      return kExitBackend;
    } catch (const BackendError& e) {
      err_ << "backend error: " << e.what() << "\n";
      return kExitBackend;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitFailure;
    }
    return kExitUsage;
  }

 private:
  int cmd_link() {
    if (mention_.empty() == dataset_.empty()) {
      throw ConfigError("link needs exactly one of --mention or --dataset");
    }
    auto s = open_session(common_, {}, command_line_);
    const Linker linker(*s.kg, s.backends, s.config.pipeline);
    std::vector<MentionSample> samples;
    if (!dataset_.empty()) {
      samples = load_dataset(dataset_);
    } else {
      MentionSample m;
      m.mention = mention_;
      m.context = context_;
      if (!image_.empty()) m.image = Image{text::read_file(image_)};
      samples.push_back(std::move(m));
    }
    const auto digest = s.manifest.digest();
    for (const auto& sample : samples) {
      const auto r = linker.link_topk(sample, link_k_);
      out_ << link_payload(r, explain_, digest).dump() << "\n";
    }
    return kExitOk;
  }

  int cmd_eval() {
    KeyValues flags;
    if (!eval_k_.empty()) flags.emplace_back("eval_k", eval_k_);
    auto s = open_session(common_, flags, command_line_);
    const auto dataset = load_dataset(dataset_);
    std::filesystem::create_directories(out_dir_);

    std::vector<EvalReport> reports;
    if (sweep_ == "rounds") {
      reports = run_round_sweep(dataset, *s.kg, s.backends, s.config.pipeline,
                                s.config.eval);
    } else if (sweep_ == "orders") {
      reports = run_order_sweep(dataset, *s.kg, s.backends, s.config.pipeline,
                                s.config.eval);
    } else {
      auto deltas = parse_ablation_spec(ablate_.empty() ? "full" : ablate_);
      for (auto& [label, rep] :
           run_ablation(dataset, *s.kg, s.backends, s.config.pipeline, deltas,
                        s.config.eval)) {
        reports.push_back(std::move(rep));
      }
    }

    const auto digest = s.manifest.digest();
    nlohmann::json reports_json = nlohmann::json::array();
    nlohmann::json timing_json = nlohmann::json::array();
    std::string traces;
    std::vector<const EvalReport*> ptrs;
    for (const auto& r : reports) {
      reports_json.push_back(report_to_json(r));
      timing_json.push_back(timing_to_json(r));
      ptrs.push_back(&r);
      for (const auto& rec : r.records) {
        traces += nlohmann::json{{"label", r.label},
                                 {"index", rec.index},
                                 {"trace", to_json(rec.trace)}}
                      .dump();
        traces += '\n';
      }
    }
    const auto dir = std::filesystem::path(out_dir_);
    text::write_file((dir / "report.json").string(),
                     nlohmann::json{{"manifest", digest},
                                    {"reports", reports_json}}
                             .dump(2) +
                         "\n");
    text::write_file((dir / "report.txt").string(), format_table(ptrs, false));
    text::write_file((dir / "traces.jsonl").string(), traces);
    text::write_file((dir / "timing.json").string(),
                     nlohmann::json{{"manifest", digest},
                                    {"reports", timing_json},
                                    {"note", kTimingFooter}}
                             .dump(2) +
                         "\n");
    text::write_file((dir / "timing.txt").string(),
                     format_table(ptrs, true) + "\n" + kTimingFooter + "\n");
    write_manifest(s.manifest, (dir / "manifest.json").string());
    out_ << format_table(ptrs, false);
    return kExitOk;
  }

  int cmd_export() {
    auto s = open_session(common_, {}, command_line_);
    const auto dataset = load_dataset(dataset_);
    const auto stats = export_instructions(dataset, *s.kg, s.config.pipeline.k,
                                           out_file_, s.config.pipeline.instruction);
    write_manifest(s.manifest, out_file_ + ".manifest.json");
    auto j = stats.to_json();
    j["manifest"] = s.manifest.digest();
    out_ << j.dump() << "\n";
    return kExitOk;
  }

  int cmd_serve() {
    auto s = open_session(common_, {}, command_line_);
    const auto colon = listen_.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--listen expects host:port");
    const auto host = listen_.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(listen_.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("--listen: bad port");
    }
    const Linker linker(*s.kg, s.backends, s.config.pipeline);
    const LinkService service(linker, s.manifest.digest());
    err_ << "listening on " << host << ":" << port << "\n";
    if (!serve_until_signal(service, host, port)) {
      err_ << "cannot listen on " << listen_ << "\n";
      return kExitFailure;
    }
    return kExitOk;
  }

  std::ostream& out_;
  std::ostream& err_;
  std::string command_line_;
  CommonArgs common_;
  std::string mention_, context_, image_, dataset_;
  std::size_t link_k_ = 1;
  bool explain_ = false;
  std::string ablate_, sweep_, eval_k_, out_dir_, out_file_;
  std::string listen_ = "127.0.0.1:8080";
};

inline int run(const std::vector<std::string>& argv,
               std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return Cli(out, err).run(argv);
}

}  // namespace i2cr::cli
