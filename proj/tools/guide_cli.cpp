#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "guide/remote_gateway.hpp"
#include "guide/scenario_runner.hpp"
#include "guide/service.hpp"
#include "guide/simulator.hpp"
#include "guide/topo_map.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

std::unique_ptr<guide::Gateway> scenario_gateway(const guide::ScenarioSpec& spec, std::uint64_t run_seed) {
  if (spec.gateway == guide::GatewayMode::kMock) return guide::default_gateway_factory(spec, run_seed);
  auto config = guide::EndpointConfig::from_env();
  if (!config) return nullptr;
  guide::RemoteOptions options;
  options.system_prompt = !spec.no_system_prompt;
  return std::make_unique<guide::RemoteGateway>(*config, options);
}

int validate_map(const std::string& file) {
  guide::TopoMap map;
  try {
    map = guide::load_map_file(file);
  } catch (const guide::MapParseError& e) {
    std::cerr << file << ":" << e.line() << ":" << e.column() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << file << ": " << e.what() << "\n";
    return 2;
  }
  const auto violations = guide::validate_geometry(map);
  for (const auto& v : violations) std::cout << "error: " << v.message << "\n";
  for (const auto& v : guide::reverse_edge_warnings(map)) std::cout << "warning: " << v.message << "\n";
  std::cout << map.name << ": " << map.nodes().size() << " nodes, " << map.edges().size() << " edges, "
            << violations.size() << " geometry violations\n";
  return violations.empty() ? 0 : 1;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int run_one(const std::string& file, std::uint64_t seed, const std::string& report, bool quiet) {
  const guide::ScenarioSpec spec = guide::load_scenario(file);
  const guide::RunReport r = guide::run_scenario(spec, seed, scenario_gateway);
  if (!quiet) {
    for (const auto& line : r.transcript) std::cout << line << "\n";
  }
  if (r.skipped) {
    std::cout << spec.name << ": skipped (" << r.skip_reason << ")\n";
  } else {
    std::cout << spec.name << ": " << (r.success ? "success" : "failure") << " (" << r.result_reason
              << "), route length " << guide::format_real(r.route_length) << " m\n";
  }
  for (const auto& f : r.expectation_failures) std::cout << "expectation: " << f << "\n";
  if (!report.empty()) write_file(report, guide::run_report_json(r).dump(2) + "\n");
  return r.passed() ? 0 : 1;
}

int run_suite(const std::string& dir, int reps, std::uint64_t seed_base, const std::string& report) {
  const guide::SuiteReport suite = guide::run_suite(dir, reps, seed_base, scenario_gateway);
  std::cout << guide::report_metrics_text(suite);
  for (const auto& r : suite.runs) {
    for (const auto& f : r.expectation_failures) {
      std::cout << r.scenario << " seed " << r.seed << ": " << f << "\n";
    }
  }
  if (!report.empty()) write_file(report, guide::report_metrics_json(suite).dump(2) + "\n");
  return suite.all_passed() ? 0 : 1;
}

int serve(const std::vector<std::string>& map_files, const std::string& store_file, const std::string& host, int port,
          const std::string& gateway) {
  guide::ServiceConfig config;
  if (gateway == "remote") {
    auto endpoint = guide::EndpointConfig::from_env();
    if (!endpoint) throw std::runtime_error("GUIDE_LLM_ENDPOINT is not set");
    config.gateway_factory = [endpoint = *endpoint](std::uint64_t) {
      return std::make_unique<guide::RemoteGateway>(endpoint);
    };
  }
  guide::SessionManager sessions(config);
  for (const auto& file : map_files) {
    guide::MapEntry entry;
    entry.map = guide::load_map_file(file);
    entry.environment = store_file.empty() || map_files.size() > 1
                            ? guide::build_environment_store(entry.map)
                            : guide::load_store(store_file, guide::StoreKind::kEnvironment);
    const std::string id = entry.map.name;
    sessions.add_map(id, std::move(entry));
    std::cout << "map " << id << " loaded from " << file << "\n";
  }
  guide::HttpService service(sessions);
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  const int bound = service.start(host, port);
  std::cout << "listening on http://" << host << ":" << bound << "/api/v1/" << std::endl;
  while (g_stop == 0) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guide: map-based navigation assistant"};
  app.require_subcommand(1);

  auto* map_cmd = app.add_subcommand("map", "Map utilities");
  map_cmd->require_subcommand(1);
  std::string map_file;
  auto* validate = map_cmd->add_subcommand("validate", "Parse a map file and check its geometry");
  validate->add_option("file", map_file, "MAP v1 file")->required();

  std::string scenario_file, report;
  std::uint64_t seed = 0;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--scenario", scenario_file, "Scenario JSON")->required();
  run->add_option("--seed", seed, "Seed");
  run->add_option("--report", report, "Write the run report as JSON");
  run->add_flag("--quiet", quiet, "Do not print the transcript");

  std::string suite_dir, suite_report;
  int reps = 20;
  std::uint64_t seed_base = 0;
  auto* suite = app.add_subcommand("suite", "Run every scenario in a directory");
  suite->add_option("--dir", suite_dir, "Scenario directory")->required();
  suite->add_option("--reps", reps, "Repetitions per scenario")->check(CLI::PositiveNumber);
  suite->add_option("--seed-base", seed_base, "First seed");
  suite->add_option("--report", suite_report, "Write the aggregate report as JSON");

  std::vector<std::string> serve_maps;
  std::string store_file, host = "127.0.0.1", gateway = "mock";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Host interactive sessions over HTTP");
  serve_cmd->add_option("--map", serve_maps, "MAP v1 file (repeatable)")->required();
  serve_cmd->add_option("--store", store_file, "Environment store JSONL (default: generated from the map)");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)");
  serve_cmd->add_option("--gateway", gateway, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return validate_map(map_file);
    if (run->parsed()) return run_one(scenario_file, seed, report, quiet);
    if (suite->parsed()) return run_suite(suite_dir, reps, seed_base, suite_report);
    if (serve_cmd->parsed()) return serve(serve_maps, store_file, host, port, gateway);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
