// SPDX-License-Identifier: Apache-2.0

// Command-line front end: solve, diff, ask, bench and serve.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "eor/agent.hpp"
#include "eor/bench.hpp"
#include "eor/graph.hpp"
#include "eor/model.hpp"
#include "eor/provider.hpp"
#include "eor/serialize.hpp"
#include "eor/service.hpp"
#include "eor/solver.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw FileError("cannot write " + path);
}

struct ProviderFlags {
  std::string url;
  std::string model;
  std::string path = "/v1/chat/completions";
  int timeout_s = 60;
  std::size_t retries = 2;
  std::string judge_url;
  std::string judge_model;
};

struct AgentFlags {
  std::vector<std::string> mock;
  std::string one_shot;
  std::size_t debug_limit = 3;
  double temperature = 0.0;
};

void add_agent_flags(CLI::App* cmd, AgentFlags& f) {
  cmd->add_option("--mock", f.mock, "Scripted provider fixture file or directory (repeatable; later files win)");
  cmd->add_option("--one-shot", f.one_shot, "File with a worked example; enables one-shot prompting");
  cmd->add_option("--debug-limit", f.debug_limit, "Debug attempts before a query fails")->capture_default_str();
  cmd->add_option("--temperature", f.temperature, "Sampling temperature")
      ->check(CLI::Range(0.0, 2.0))
      ->capture_default_str();
}

eor::AgentConfig agent_config(const AgentFlags& f) {
  eor::AgentConfig config;
  config.debug_limit = f.debug_limit;
  config.temperature = f.temperature;
  if (!f.one_shot.empty()) {
    config.shot_mode = eor::ShotMode::kOne;
    config.example_qa = read_text(f.one_shot);
  }
  return config;
}

std::unique_ptr<eor::ChatProvider> http_provider(const std::string& url, const std::string& model,
                                                 const ProviderFlags& p) {
  eor::HttpProviderConfig config;
  config.base_url = url;
  config.model = model;
  config.path = p.path;
  config.timeout = std::chrono::seconds(p.timeout_s);
  config.retries = p.retries;
  return std::make_unique<eor::HttpChatProvider>(config);
}

// Scripted playback when fixtures are given, otherwise the configured endpoint.
std::unique_ptr<eor::ChatProvider> make_provider(const AgentFlags& f, const ProviderFlags& p,
                                                 const std::string& fixture_name) {
  if (!f.mock.empty()) return std::make_unique<eor::ScriptedProvider>(eor::load_fixtures(f.mock, fixture_name));
  if (p.url.empty()) throw UsageError("no provider: pass --mock <fixtures> or --provider <url>");
  return http_provider(p.url, p.model, p);
}

std::string solution_line(const eor::Solution& s) {
  std::string line(eor::to_string(s.status));
  if (s.status == eor::SolveStatus::kOptimal) line += " " + eor::format_number(s.objective);
  return line;
}

int run_solve(const std::string& path, bool as_json) {
  const eor::Solution s = eor::solve_milp(eor::parse_model(read_text(path)));
  if (as_json) {
    std::cout << eor::to_json(s).dump(2) << "\n";
  } else {
    std::cout << solution_line(s) << "\n";
    for (const auto& [name, value] : s.assignment) std::cout << "  " << name << " = " << eor::format_number(value) << "\n";
  }
  return s.status == eor::SolveStatus::kLimit ? kDomainError : kOk;
}

int run_diff(const std::string& a, const std::string& b, bool as_json) {
  const auto report = eor::decision_information(eor::parse_model(read_text(a)), eor::parse_model(read_text(b)));
  if (as_json) {
    std::cout << eor::to_json(report).dump(2) << "\n";
  } else {
    std::cout << eor::describe(report) << "\n";
  }
  return kOk;
}

int run_ask(const std::string& model_path, const std::string& query, const std::string& key,
            const std::string& write_updated, bool as_json, const AgentFlags& f, const ProviderFlags& p) {
  const eor::LinearModel model = eor::parse_model(read_text(model_path));
  auto provider = make_provider(f, p, std::filesystem::path(model_path).stem().string());
  eor::AgentConfig config = agent_config(f);
  config.session_key = key;
  const eor::SessionOutcome out = eor::commander_run(model, query, config, *provider);
  if (as_json) {
    std::cout << eor::to_json(out).dump(2) << "\n";
  } else if (out.ok()) {
    const double before = out.original_solution.objective;
    const double after = out.updated_solution.objective;
    std::cout << "patch:\n" << out.patch->to_document() << "\n";
    if (out.updated_solution.status == eor::SolveStatus::kOptimal) {
      const double delta = after - before;
      std::cout << "objective " << eor::format_number(before) << " -> " << eor::format_number(after) << " (delta "
                << (delta >= 0 ? "+" : "") << eor::format_number(delta) << ")\n";
    } else {
      std::cout << "objective " << eor::format_number(before) << " -> " << solution_line(out.updated_solution) << "\n";
    }
    std::cout << eor::describe(out.ged_report) << "\n";
    if (out.interpretation.impact_rating) std::cout << "impact " << *out.interpretation.impact_rating << "/10\n";
    std::cout << "\nExplanation of Updated Code:\n"
              << out.interpretation.explanation_correctness << "\n\nExplanation of Query on Results:\n"
              << out.interpretation.explanation_results << "\n";
  }
  if (!out.ok()) {
    std::cerr << "query failed (" << eor::to_string(out.failure->kind) << ") after " << out.retry_count
              << " debug attempts: " << out.failure->detail << "\n";
    return kDomainError;
  }
  if (!write_updated.empty()) write_text(write_updated, out.updated_source);
  return kOk;
}

struct BenchFlags {
  std::string dataset;
  std::size_t parallel = 1;
  bool no_judge = false;
  std::string label = "EOR";
  std::string report;
  std::string transcripts;
};

int run_bench(const BenchFlags& b, const AgentFlags& f, const ProviderFlags& p) {
  const auto dataset = eor::load_dataset(b.dataset);
  const bool live = f.mock.empty();
  auto provider = make_provider(f, p, dataset.front().id);
  eor::EvalResult result = eor::run_accuracy(dataset, eor::make_runner(*provider, agent_config(f)), b.parallel);
  if (!b.no_judge) {
    std::unique_ptr<eor::ChatProvider> separate;
    if (live && !p.judge_url.empty()) separate = http_provider(p.judge_url, p.judge_model, p);
    eor::judge_results(result, separate ? *separate : *provider, b.label);
  }
  std::cout << eor::report_table(result, live);
  if (!b.report.empty()) write_text(b.report, eor::report_json(result, live).dump(2) + "\n");
  if (!b.transcripts.empty()) {
    json all = json::array();
    for (const auto& q : result.queries) all.push_back({{"session", q.session_key}, {"outcome", eor::to_json(q.outcome)}});
    write_text(b.transcripts, all.dump(2) + "\n");
  }
  return kOk;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server != nullptr) g_server->stop();
}

int run_serve(const std::string& host, int port, const std::vector<std::string>& datasets,
              const std::string& journal, const AgentFlags& f, const ProviderFlags& p) {
  eor::ServiceOptions options;
  options.default_config = agent_config(f);
  options.journal_dir = journal;
  std::string fixture_name = "fixture";
  for (const auto& path : datasets) {
    for (const auto& problem : eor::load_dataset(path)) {
      if (fixture_name == "fixture") fixture_name = problem.id;
      for (std::size_t k = 0; k < problem.queries.size(); ++k) {
        options.query_routes[problem.queries[k].text] = eor::session_key(problem, k + 1);
      }
    }
  }
  auto provider = make_provider(f, p, fixture_name);
  eor::Service service(*provider, options);
  const std::size_t restored = service.restore();
  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw FileError("cannot listen on " + host + ":" + std::to_string(port));
  std::cout << "listening on http://" << host << ":" << bound;
  if (restored > 0) std::cout << " (" << restored << " sessions restored)";
  std::cout << std::endl;
  server.listen_after_bind();
  service.shutdown();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"What-if analysis workbench for linear and integer optimization models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML or INI file with provider settings");

  ProviderFlags provider;
  app.add_option("--provider", provider.url, "Chat-completions base URL, e.g. https://api.example.com");
  app.add_option("--provider-model", provider.model, "Model name sent to the provider");
  app.add_option("--provider-path", provider.path, "Request path")->capture_default_str();
  app.add_option("--timeout", provider.timeout_s, "Provider timeout in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--retries", provider.retries, "Extra attempts on transport errors and 5xx")->capture_default_str();
  app.add_option("--judge-provider", provider.judge_url, "Separate base URL for judging");
  app.add_option("--judge-model", provider.judge_model, "Model name for judging");

  std::string model_path;
  std::string model_b;
  bool as_json = false;

  auto* solve = app.add_subcommand("solve", "Solve a model and print the optimum");
  solve->add_option("model", model_path, "Model file")->required();
  solve->add_flag("--json", as_json, "Print the solution document");

  std::string model_a;
  auto* diff = app.add_subcommand("diff", "Decision-information distance between two models");
  diff->add_option("model_a", model_a, "Original model file")->required();
  diff->add_option("model_b", model_b, "Updated model file")->required();
  diff->add_flag("--json", as_json, "Print the report document");

  AgentFlags agent;
  std::string query;
  std::string key = "cli/q1";
  std::string write_updated;
  auto* ask = app.add_subcommand("ask", "Answer one what-if query against a model");
  ask->add_option("model", model_path, "Model file")->required();
  ask->add_option("--query,-q", query, "What-if question")->required();
  ask->add_option("--session-key", key, "Fixture session used by --mock")->capture_default_str();
  ask->add_option("--write-updated", write_updated, "Write the patched model to this file");
  ask->add_flag("--json", as_json, "Print the session outcome document");
  add_agent_flags(ask, agent);

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Run a benchmark dataset and report accuracy");
  bench->add_option("dataset", bench_flags.dataset, "Dataset file")->required();
  bench->add_option("--parallel", bench_flags.parallel, "Queries run at once")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_flag("--no-judge", bench_flags.no_judge, "Skip explanation judging");
  bench->add_option("--label", bench_flags.label, "Method label shown to the judge")->capture_default_str();
  bench->add_option("--report", bench_flags.report, "Write the report document to this file");
  bench->add_option("--transcripts", bench_flags.transcripts, "Write every session outcome to this file");
  add_agent_flags(bench, agent);

  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> datasets;
  std::string journal;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", host, "Interface to bind")->capture_default_str();
  serve->add_option("--port", port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--dataset", datasets, "Dataset whose query texts route to fixture sessions (repeatable)");
  serve->add_option("--journal", journal, "Directory for per-session journals; existing ones are restored");
  add_agent_flags(serve, agent);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*solve) return run_solve(model_path, as_json);
    if (*diff) return run_diff(model_a, model_b, as_json);
    if (*ask) return run_ask(model_path, query, key, write_updated, as_json, agent, provider);
    if (*bench) return run_bench(bench_flags, agent, provider);
    if (*serve) return run_serve(host, port, datasets, journal, agent, provider);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const eor::ModelError& e) {
    std::cerr << "model error";
    if (e.line() > 0) std::cerr << " at line " << e.line() << ", column " << e.column();
    std::cerr << ": " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kUsageError;
}
