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

#include "i2cr/evaluation.hpp"

#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "i2cr/synthetic.hpp"

namespace i2cr {
namespace {

EvalRecord rec(std::optional<std::string> gold, std::vector<std::string> ranked,
               double t = 0.0) {
  EvalRecord r;
  r.gold = std::move(gold);
  r.prediction = ranked.empty() ? std::nullopt : std::optional<std::string>(ranked[0]);
  r.ranked = std::move(ranked);
  r.wall_time = t;
  return r;
}

TEST(TopkAccuracyTest, SmallExamples) {
  const std::vector<EvalRecord> four = {rec("a", {"a"}), rec("b", {"b"}), rec("c", {"c"}),
                                        rec("d", {"x", "d"})};
  EXPECT_DOUBLE_EQ(topk_accuracy(four, 1), 0.75);
  EXPECT_DOUBLE_EQ(topk_accuracy(four, 2), 1.0);
  EXPECT_DOUBLE_EQ(avg_response_time({rec("a", {}, 1.0), rec("a", {}, 3.0)}), 2.0);
  EXPECT_THROW(topk_accuracy({}, 1), EmptyEvalSet);
  EXPECT_THROW(avg_response_time({}), EmptyEvalSet);
  EXPECT_THROW(topk_accuracy(four, 0), Error);
}

TEST(TopkAccuracyTest, NilScoringModes) {
  std::vector<EvalRecord> rs = {rec("a", {"a"}), rec(std::nullopt, {}),
                                rec(std::nullopt, {"b"})};
  EXPECT_DOUBLE_EQ(topk_accuracy(rs, 1, NilScoring::strict), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(topk_accuracy(rs, 1, NilScoring::ignore), 1.0);
  EvalRecord failed = rec("a", {"a"});
  failed.error = "boom";
  rs.push_back(failed);
  EXPECT_DOUBLE_EQ(topk_accuracy(rs, 1, NilScoring::strict), 0.5);
}

// Independent recount: plain loops over the raw fields.
double recount(const std::vector<EvalRecord>& rs, std::size_t K) {
  int hits = 0;
  for (const auto& r : rs) {
    bool ok = false;
    if (!r.error) {
      if (!r.gold) {
        ok = !r.prediction.has_value();
      } else {
        for (std::size_t i = 0; i < r.ranked.size() && i < K; ++i) ok = ok || r.ranked[i] == *r.gold;
      }
    }
    hits += ok ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(rs.size());
}

std::vector<EvalRecord> random_records(std::mt19937& rng, std::size_t n) {
  std::vector<EvalRecord> rs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> ranked;
    const auto len = rng() % 6;
    for (std::size_t j = 0; j < len; ++j) ranked.push_back("e" + std::to_string(rng() % 8));
    std::optional<std::string> gold;
    if (rng() % 10) gold = "e" + std::to_string(rng() % 8);
    auto r = rec(gold, ranked, (rng() % 1000) / 100.0);
    if (rng() % 25 == 0) r.error = "x";
    rs.push_back(r);
  }
  return rs;
}

TEST(TopkAccuracyTest, MatchesRecountAndIsMonotone) {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rs = random_records(rng, 200);
    double prev = 0.0;
    for (std::size_t K = 1; K <= 6; ++K) {
      const double a = topk_accuracy(rs, K);
      EXPECT_EQ(a, recount(rs, K));
      EXPECT_GE(a, prev);
      prev = a;
    }
    double sum = 0.0;
    for (const auto& r : rs) sum += r.wall_time;
    EXPECT_EQ(avg_response_time(rs), sum / 200.0);
  }
}

TEST(ConfigDeltaTest, LabelsRoundTrip) {
  for (const char* label : {"full", "w/o b", "w/o bcd", "w/o cd", "w/o ocr,cap",
                            "order:den,ocr,cap,tag", "all-at-once", "w/o b+all-at-once"}) {
    EXPECT_EQ(ConfigDelta::parse(label).label(), label);
  }
  PipelineConfig c;
  ConfigDelta::parse("w/o bcd").apply(c);
  EXPECT_FALSE(c.enable_icr || c.enable_iav || c.enable_vif);
  c = PipelineConfig{};
  ConfigDelta::parse("w/o ocr,cap").apply(c);
  EXPECT_EQ(c.clue_order, (std::vector<ClueKind>{ClueKind::den, ClueKind::tag}));
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(ConfigDelta::parse("w/o xyz"), ConfigError);
  EXPECT_THROW(ConfigDelta::parse("order:ocr,ocr"), ConfigError);
  EXPECT_THROW(ConfigDelta::parse("everything"), ConfigError);
  const auto spec = parse_ablation_spec("full; w/o b ;;w/o bcd");
  ASSERT_EQ(spec.size(), 3u);
  EXPECT_EQ(spec[1].label(), "w/o b");
}

class SteeringEvalTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { fixture_ = new synthetic::SteeringFixture(synthetic::make_steering_fixture(200)); }
  static void TearDownTestSuite() {
    delete fixture_;
    fixture_ = nullptr;
  }
  static synthetic::SteeringFixture* fixture_;
};
synthetic::SteeringFixture* SteeringEvalTest::fixture_ = nullptr;

TEST_F(SteeringEvalTest, AblationShape) {
  const auto& f = *fixture_;
  const auto rows = run_ablation(f.dataset, f.kg, f.scripted, PipelineConfig{},
                                 parse_ablation_spec("full;w/o b;w/o c;w/o d;w/o bcd;all-at-once"));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_DOUBLE_EQ(rows[0].second.accuracy_at(1), 1.0);
  EXPECT_DOUBLE_EQ(rows[1].second.accuracy_at(1), 1.0);
  EXPECT_DOUBLE_EQ(rows[2].second.accuracy_at(1), 0.6);  // no IAV failure, no clue
  EXPECT_DOUBLE_EQ(rows[3].second.accuracy_at(1), 0.6);
  EXPECT_DOUBLE_EQ(rows[4].second.accuracy_at(1), 0.6);
  EXPECT_DOUBLE_EQ(rows[5].second.accuracy_at(1), 1.0);
  EXPECT_EQ(rows[4].first, "w/o bcd");
  for (const auto& [label, r] : rows) {
    EXPECT_LE(r.accuracy_at(1), r.accuracy_at(3));
    EXPECT_LE(r.accuracy_at(3), r.accuracy_at(5));
    EXPECT_EQ(r.failures, 0u);
  }
}

TEST_F(SteeringEvalTest, RoundSweepAndOrders) {
  const auto& f = *fixture_;
  const auto rounds = run_round_sweep(f.dataset, f.kg, f.scripted, PipelineConfig{});
  ASSERT_EQ(rounds.size(), 5u);
  const double expected[] = {0.6, 0.7, 0.8, 0.9, 1.0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(rounds[i].accuracy_at(1), expected[i]);
  const auto orders = run_order_sweep(f.dataset, f.kg, f.scripted, PipelineConfig{});
  ASSERT_EQ(orders.size(), 24u);
  for (const auto& r : orders) EXPECT_DOUBLE_EQ(r.accuracy_at(1), 1.0) << r.label;
}

TEST_F(SteeringEvalTest, WorkerCountDoesNotChangeReport) {
  const auto& f = *fixture_;
  EvalOptions one, many;
  many.workers = 8;
  const auto a = run_eval(f.dataset, f.kg, f.scripted, PipelineConfig{}, one);
  const auto b = run_eval(f.dataset, f.kg, f.scripted, PipelineConfig{}, many);
  EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
  const auto rep = run_repeated(f.dataset, f.kg, f.scripted, PipelineConfig{}, 2, many);
  for (double s : rep.stddev) EXPECT_EQ(s, 0.0);
  EXPECT_DOUBLE_EQ(rep.mean[0], 1.0);
}

TEST_F(SteeringEvalTest, FailuresAreCountedAndCapped) {
  const auto& f = *fixture_;
  auto b = f.scripted;
  auto inner = b.xmodal;
  // Every fifth image cannot be scored.
  b.xmodal = std::make_shared<FunctionCrossModalScorer>(
      [inner](const std::string& d, const Image& img) {
        if (text::fnv1a64(img.bytes) % 5 == 0) throw ImageDecodeError("bad image");
        return inner->cross_modal_score(d, img);
      });
  EvalOptions opts;
  opts.max_failure_rate = 1.0;
  const auto r = run_eval(f.dataset, f.kg, b, PipelineConfig{}, opts);
  EXPECT_GT(r.failures, 0u);
  std::size_t tagged = 0;
  for (const auto& rec : r.records) tagged += rec.error ? 1 : 0;
  EXPECT_EQ(tagged, r.failures);
  EXPECT_DOUBLE_EQ(r.accuracy_at(1), 1.0 - static_cast<double>(r.failures) / 200.0);
  opts.max_failure_rate = static_cast<double>(r.failures) / 200.0 - 0.01;
  EXPECT_THROW(run_eval(f.dataset, f.kg, b, PipelineConfig{}, opts), Error);
}

TEST_F(SteeringEvalTest, TableAndJson) {
  const auto& f = *fixture_;
  auto r = run_eval(f.dataset, f.kg, f.scripted, PipelineConfig{});
  r.label = "full";
  const auto table = format_table({&r}, true);
  EXPECT_NE(table.find("Setting"), std::string::npos);
  EXPECT_NE(table.find("Top-5"), std::string::npos);
  EXPECT_NE(table.find("100.0"), std::string::npos);
  EXPECT_NE(table.find("Avg-Time(s)"), std::string::npos);
  EXPECT_EQ(format_table({&r}, false).find("Avg-Time"), std::string::npos);
  const auto j = report_to_json(r);
  EXPECT_EQ(j["accuracy"]["top1"], 1.0);
  EXPECT_EQ(j["records"].size(), 200u);
  EXPECT_FALSE(j.dump().find("wall_time") != std::string::npos);
  EXPECT_EQ(timing_to_json(r)["wall_times"].size(), 200u);
}

TEST(RunEvalTest, RejectsEmptyAndMissingGold) {
  KgSnapshot kg({{"a", "A", "", {}}});
  Backends b;
  b.selector = std::make_shared<FunctionSelector>([](const SelectorRequest&) { return std::string("A"); });
  PipelineConfig cfg;
  cfg.enable_icr = cfg.enable_iav = cfg.enable_vif = false;
  EXPECT_THROW(run_eval({}, kg, b, cfg), EmptyEvalSet);
  MentionSample s{"A", "", std::nullopt, std::nullopt, false};
  EXPECT_THROW(run_eval({s}, kg, b, cfg), MissingGold);
  s.gold_id = "a";
  EXPECT_DOUBLE_EQ(run_eval({s}, kg, b, cfg).accuracy_at(1), 1.0);
}

}  // namespace
}  // namespace i2cr
