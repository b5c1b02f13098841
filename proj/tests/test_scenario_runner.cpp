#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "guide/scenario_runner.hpp"

using namespace guide;
using nlohmann::json;

namespace {

const std::filesystem::path kData = GUIDE_DATA_DIR;

json rect_doc() {
  return json{{"name", "rect_case"},
              {"map", "rectangle.map"},
              {"start", {{"node", "A"}, {"heading", 0}}},
              {"script", json::array({"take me to C"})},
              {"expected", {{"goal_node", "C"}, {"success", true}}}};
}

ScenarioSpec rect_spec(const json& doc = rect_doc()) { return parse_scenario(doc, kData / "maps"); }

std::string parse_error(const json& doc) {
  try {
    rect_spec(doc);
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ScenarioParse, Basic) {
  const ScenarioSpec s = rect_spec();
  EXPECT_EQ(s.name, "rect_case");
  EXPECT_EQ(s.start.node, NodeId("A"));
  ASSERT_EQ(s.script.size(), 1u);
  EXPECT_EQ(s.script[0].text, "take me to C");
  EXPECT_EQ(s.script[0].at_event, 1);
  EXPECT_EQ(s.gateway, GatewayMode::kMock);
  EXPECT_EQ(s.hazard_response, HazardResponse::kAuto);
  EXPECT_TRUE(s.store_path.empty());
  EXPECT_EQ(s.expected.goal_node, NodeId("C"));
}

TEST(ScenarioParse, Errors) {
  json d = rect_doc();
  d["colour"] = "red";
  EXPECT_NE(parse_error(d).find("colour"), std::string::npos);

  d = rect_doc();
  d["start"]["node"] = "Q";
  EXPECT_NE(parse_error(d).find("Q"), std::string::npos);

  d = rect_doc();
  d["faults"] = json::array({{{"type", "earthquake"}}});
  EXPECT_NE(parse_error(d).find("earthquake"), std::string::npos);

  d = rect_doc();
  d["objects"] = json::array({{{"label", "chair"}, {"edge", {"A", "C"}}}});
  EXPECT_NE(parse_error(d).find("missing edge"), std::string::npos);

  d = rect_doc();
  d["confusion"] = {{"false_positive", 1.5}};
  EXPECT_FALSE(parse_error(d).empty());

  d = rect_doc();
  d["gateway"] = "oracle";
  EXPECT_FALSE(parse_error(d).empty());

  d = rect_doc();
  d["prefs"] = {{"speed_mps", 0.0}};
  EXPECT_FALSE(parse_error(d).empty());

  d = rect_doc();
  d["map"] = "nowhere.map";
  EXPECT_NE(parse_error(d).find("cannot load map"), std::string::npos);

  d = rect_doc();
  d.erase("start");
  EXPECT_NE(parse_error(d).find("start"), std::string::npos);

  EXPECT_THROW(load_scenario(kData / "no_such.json"), ScenarioError);
}

TEST(ScenarioRunner, FormatRate) {
  EXPECT_EQ(format_rate(1, 1), "1/1 (100%)");
  EXPECT_EQ(format_rate(0, 0), "0/0 (n/a)");
  EXPECT_EQ(format_rate(2, 3), "2/3 (67%)");
  EXPECT_EQ(format_rate(19, 20), "19/20 (95%)");
}

TEST(ScenarioRunner, HappyPath) {
  const RunReport r = run_scenario(rect_spec(), 1);
  EXPECT_TRUE(r.success) << r.result_reason;
  EXPECT_EQ(r.result_reason, "arrived");
  EXPECT_EQ(r.final_node, NodeId("C"));
  EXPECT_EQ(r.route_length, 7.0);
  EXPECT_TRUE(r.passed());
  EXPECT_FALSE(r.detected_kidnap.has_value());
  ASSERT_EQ(r.routes.size(), 1u);
  EXPECT_EQ(r.routes[0].nodes, (std::vector<NodeId>{NodeId("A"), NodeId("B"), NodeId("C")}));
  EXPECT_EQ(r.speed_trace, std::vector<double>{1.0});
}

TEST(ScenarioRunner, ExpectationMismatchIsReported) {
  json d = rect_doc();
  d["expected"]["success"] = false;
  const RunReport r = run_scenario(rect_spec(d), 1);
  EXPECT_FALSE(r.passed());
  EXPECT_NE(r.expectation_failures.front().find("expected success=false"), std::string::npos);
}

TEST(ScenarioRunner, KidnapDetectedAndRecovered) {
  json d = rect_doc();
  d["faults"] = json::array({{{"type", "kidnap"}, {"trigger_leg", 1}, {"teleport_to", "D"}, {"heading", 0}}});
  const RunReport r = run_scenario(rect_spec(d), 3);
  ASSERT_TRUE(r.detected_kidnap.has_value());
  EXPECT_TRUE(*r.detected_kidnap);
  EXPECT_TRUE(r.recovered.value_or(false));
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.final_node, NodeId("C"));
}

TEST(ScenarioRunner, NoSystemPromptSkipsUnderMock) {
  json d = rect_doc();
  d["ablations"] = {{"no_system_prompt", true}};
  const RunReport r = run_scenario(rect_spec(d), 1);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.skip_reason, "no_system_prompt is a remote-only ablation");
  EXPECT_TRUE(r.passed());
}

TEST(ScenarioRunner, RemoteWithoutFactorySkips) {
  json d = rect_doc();
  d["gateway"] = "remote";
  const RunReport r = run_scenario(rect_spec(d), 1);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.skip_reason, "remote gateway not configured");
}

TEST(ScenarioRunner, TranscriptsAreDeterministic) {
  json d = rect_doc();
  d["faults"] = json::array({{{"type", "noise"}, {"sigma", 0.05}}});
  d["objects"] = json::array({{{"label", "chair"}, {"edge", {"B", "C"}}}});
  d["confusion"] = {{"false_positive", 0.5}, {"false_negative", 0.5}};
  const ScenarioSpec s = rect_spec(d);
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const RunReport a = run_scenario(s, seed), b = run_scenario(s, seed);
    EXPECT_EQ(a.transcript, b.transcript);
    EXPECT_EQ(run_report_json(a).dump(), run_report_json(b).dump());
  }
}

TEST(ScenarioRunner, RunSeedMixesScenarioName) {
  ScenarioSpec a = rect_spec(), b = rect_spec();
  b.name = "other";
  EXPECT_NE(run_seed_for(a, 1), run_seed_for(b, 1));
  EXPECT_NE(run_seed_for(a, 1), run_seed_for(a, 2));
  EXPECT_EQ(run_seed_for(a, 5), run_seed_for(a, 5));
}

TEST(ScenarioRunner, ConfusionReproduciblePerSeed) {
  const auto a = run_suite(kData / "scenarios" / "hazard_confusion", 2, 11);
  const auto b = run_suite(kData / "scenarios" / "hazard_confusion", 2, 11);
  EXPECT_EQ(a.total.confusion, b.total.confusion);
  EXPECT_EQ(a.total.confusion.tp + a.total.confusion.fn, 60);
  EXPECT_EQ(a.total.confusion.fp + a.total.confusion.tn, 60);
  EXPECT_EQ(report_metrics_text(a), report_metrics_text(b));
}

TEST(ScenarioRunner, EmptySuiteThrows) {
  const auto dir = std::filesystem::temp_directory_path() / "guide_empty_suite_test";
  std::filesystem::create_directories(dir);
  EXPECT_THROW(run_suite(dir, 1, 1), ScenarioError);
  EXPECT_THROW(run_suite(dir / "missing", 1, 1), ScenarioError);
  EXPECT_THROW(run_specs({rect_spec()}, 0, 1), ScenarioError);
  EXPECT_THROW(run_specs({}, 1, 1), ScenarioError);
  std::filesystem::remove_all(dir);
}

TEST(ScenarioRunner, AggregateIsOrderIndependent) {
  std::vector<RunReport> runs;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 40; ++i) {
    RunReport r;
    r.scenario = "s" + std::to_string(i % 4);
    r.seed = static_cast<std::uint64_t>(i);
    r.success = rng() % 2;
    r.skipped = rng() % 7 == 0;
    if (i % 3 == 0) {
      r.detected_kidnap = rng() % 2;
      r.recovered = *r.detected_kidnap && rng() % 2;
    }
    if (i % 2 == 0) {
      Confusion c;
      switch (rng() % 4) {
        case 0: c.tp = 1; break;
        case 1: c.fp = 1; break;
        case 2: c.fn = 1; break;
        default: c.tn = 1; break;
      }
      r.hazard_confusion = c;
    }
    if (rng() % 5 == 0) r.expectation_failures.push_back("x");
    runs.push_back(r);
  }
  const std::string ref = report_metrics_text(aggregate(runs));
  const std::string ref_json = report_metrics_json(aggregate(runs)).dump();
  for (int k = 0; k < 20; ++k) {
    std::shuffle(runs.begin(), runs.end(), rng);
    EXPECT_EQ(report_metrics_text(aggregate(runs)), ref);
    EXPECT_EQ(report_metrics_json(aggregate(runs)).dump(), ref_json);
  }
  const SuiteReport rep = aggregate(runs);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.total.runs, 40);
  int sum = 0;
  for (const auto& row : rep.rows) sum += row.successes;
  EXPECT_EQ(sum, rep.total.successes);
}

TEST(ScenarioRunner, MetricsTextGolden) {
  std::vector<RunReport> runs(3);
  runs[0].scenario = "alpha";
  runs[0].success = true;
  runs[0].detected_kidnap = true;
  runs[0].recovered = true;
  runs[1].scenario = "alpha";
  runs[1].seed = 1;
  runs[1].hazard_confusion = Confusion{1, 0, 0, 0};
  runs[1].success = true;
  runs[2].scenario = "beta";
  runs[2].hazard_confusion = Confusion{0, 0, 0, 1};
  runs[2].expectation_failures = {"nope"};
  const std::string expected =
      "Navigation\n"
      "scenario  runs   success         skipped\n"
      "alpha     2      2/2 (100%)      0\n"
      "beta      1      0/1 (0%)        0\n"
      "TOTAL     3      2/3 (67%)       0\n"
      "\n"
      "Localization\n"
      "scenario  kidnapped  detection       recovery\n"
      "alpha     1          1/1 (100%)      1/1 (100%)\n"
      "TOTAL     1          1/1 (100%)      1/1 (100%)\n"
      "\n"
      "Hazard\n"
      "scenario  trials  TP    FP    FN    TN\n"
      "alpha     1       1     0     0     0\n"
      "beta      1       0     0     0     1\n"
      "TOTAL     2       1     0     0     1\n"
      "\n"
      "Expectation failures: 1\n";
  EXPECT_EQ(report_metrics_text(aggregate(runs)), expected);
}

TEST(ScenarioRunner, ShippedScenariosParse) {
  int n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(kData / "scenarios")) {
    if (e.path().extension() != ".json") continue;
    const ScenarioSpec s = load_scenario(e.path());
    EXPECT_EQ(s.name, e.path().stem().string());
    ++n;
  }
  EXPECT_GT(n, 200);
}
