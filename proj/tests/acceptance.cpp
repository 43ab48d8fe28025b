// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "eor/bench.hpp"
#include "eor/graph.hpp"
#include "eor/serialize.hpp"
#include "eor/solver.hpp"
#include "eor/templates.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using nlohmann::json;
using namespace eor;

class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckFailed(what);
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(15);
  out << v;
  return out.str();
}

std::string dataset_path() { return testing::data_path("benchmark/aircraft.eorb"); }

json mock_script(const std::vector<std::string>& overlays = {}) {
  std::vector<std::string> paths = {testing::data_path("mock")};
  for (const auto& o : overlays) paths.push_back(testing::data_path("mock/faults/" + o + ".json"));
  return load_fixtures(paths, "aircraft");
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun eor_cli(const std::string& args) {
  const std::string cmd = std::string(EOR_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / ("eor_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::string first_line(std::string_view text) { return std::string(text.substr(0, text.find('\n'))); }

// Chat-completions endpoint on 127.0.0.1 that answers from the scripted
// fixtures, recovering the workflow step and query from the prompt text.
class LoopbackEndpoint {
 public:
  explicit LoopbackEndpoint(const json& fixture) : script_(fixture) {
    for (const auto& problem : load_dataset(dataset_path())) {
      for (std::size_t k = 0; k < problem.queries.size(); ++k) {
        routes_.emplace_back(problem.queries[k].text, session_key(problem, k + 1));
      }
    }
    // Interpreter prompts carry the patch rather than the query.
    for (const auto& [session, steps] : fixture["sessions"].items()) {
      if (!steps.contains("writer") || !steps["writer"].is_string()) continue;
      try {
        routes_.emplace_back(extract_patch(steps["writer"].get<std::string>()).to_document(), session);
      } catch (const PatchError&) {
      }
    }
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      const json body = json::parse(req.body);
      ProviderRequest request;
      for (const auto& m : body["messages"]) request.messages.push_back({m["role"], m["content"]});
      request.step = step_of(request.messages);
      request.session = session_of(request.messages);
      try {
        const std::string text = script_.complete(request).text;
        res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump(),
                        "application/json");
      } catch (const ProviderError& e) {
        res.status = 404;
        res.set_content(e.what(), "text/plain");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LoopbackEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t requests() const { return requests_; }

 private:
  static std::string step_of(const std::vector<ChatMessage>& messages) {
    const std::string& last = messages.back().content;
    if (last.rfind(first_line(template_text(TemplateId::kJudge)).substr(0, 40), 0) == 0) return "judge";
    if (messages.front().content.rfind(first_line(template_text(TemplateId::kSafeguardSystem)), 0) == 0) {
      return "safeguard";
    }
    if (last.rfind(first_line(template_text(TemplateId::kInterpreter)), 0) == 0) return "interpreter";
    return "writer";
  }

  std::string session_of(const std::vector<ChatMessage>& messages) const {
    for (const auto& [text, key] : routes_) {
      for (const auto& m : messages) {
        if (m.content.find(text) != std::string::npos) return key;
      }
    }
    return "unknown";
  }

  ScriptedProvider script_;
  std::vector<std::pair<std::string, std::string>> routes_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<std::size_t> requests_{0};
};

std::vector<std::string> loopback_urls;

std::string truth_labels() {
  const auto start = std::chrono::steady_clock::now();
  const Solution base = solve_milp(parse_model(testing::aircraft_source()));
  require(base.status == SolveStatus::kOptimal && std::round(base.objective) == testing::kAircraftBaseTruth,
          "base objective " + fmt(base.objective));
  const double expected[] = {160000, 200000, 184000, 220000, 215000, 226000, 170000, 210000, 240000, 200000};
  for (int k = 1; k <= 10; ++k) {
    const Solution s = solve_milp(parse_model(testing::aircraft_variant(k)));
    require(s.status == SolveStatus::kOptimal && std::round(s.objective) == expected[k - 1],
            "query " + std::to_string(k) + " gave " + fmt(s.objective));
  }
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  require(ms < 1000.0, "took " + fmt(ms) + " ms");
  return "base 200000 and all 10 labels reproduced in " + fmt(std::round(ms * 100) / 100) + " ms";
}

std::string decision_information_values() {
  const auto graph = [](const std::string& src) { return build_graph(to_standard_form(parse_model(src))); };
  const BipartiteGraph base = graph(testing::aircraft_source());
  const BipartiteGraph q5 = graph(testing::aircraft_variant(5));
  const BipartiteGraph q1 = graph(testing::aircraft_variant(1));
  const GedReport n5 = ged_named(q5, base);
  const GedReport e5 = ged_exact(q5, base);
  const GedReport n1 = ged_named(q1, base);
  const GedReport e1 = ged_exact(q1, base);
  require(n5.ged == 6 && std::abs(n5.nged - 0.3) <= 1e-12, "query 5: GED " + std::to_string(n5.ged) + " NGED " + fmt(n5.nged));
  require(std::abs(n1.nged - 1.0 / 14.0) <= 1e-12, "query 1: NGED " + fmt(n1.nged));
  require(e5.ged == n5.ged && e5.nged == n5.nged, "query 5: exact matching gave " + std::to_string(e5.ged));
  require(e1.ged == n1.ged && e1.nged == n1.nged, "query 1: exact matching gave " + std::to_string(e1.ged));
  return "query 5 GED=6 NGED=0.3, query 1 NGED=1/14, named = exact";
}

std::string oracle_suites() {
  std::mt19937 rng(2024);
  testing::RandomModelOptions opt;
  opt.max_vars = 3;
  for (int trial = 0; trial < 50; ++trial) {
    const LinearModel m = parse_model(testing::random_model_source(rng, opt));
    const auto oracle = testing::enumerate_integer_box(m);
    const Solution s = solve_milp(m);
    require(oracle.feasible ? s.status == SolveStatus::kOptimal && s.objective == oracle.objective
                            : s.status == SolveStatus::kInfeasible,
            "MILP disagrees with enumeration on:\n" + m.source_text);
  }
  const auto graph = [](const std::string& src) { return build_graph(to_standard_form(parse_model(src))); };
  const BipartiteGraph base = graph(testing::aircraft_source());
  for (int k = 1; k <= 10; ++k) {
    const BipartiteGraph u = graph(testing::aircraft_variant(k));
    require(ged_named(u, base).ged == ged_exact(u, base).ged, "bundled query " + std::to_string(k));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const BipartiteGraph g = testing::perturb_attributes(base, rng, 1 + trial % 2);
    require(ged_named(g, base).ged == ged_exact(g, base).ged, "perturbation " + std::to_string(trial));
  }
  for (int trial = 0; trial < 500; ++trial) {
    const auto [a, b] = testing::random_edit_pair(rng);
    const double nged = ged_named(graph(b), graph(a)).nged;
    require(nged >= 0.0 && nged <= 1.0, "NGED " + fmt(nged) + " for edit pair " + std::to_string(trial));
  }
  return "MILP = enumeration on 50 models; named = exact on 10 bundled + 100 perturbed; NGED in [0,1] on 500 pairs";
}

EvalResult scripted_run(const json& fixture) {
  ScriptedProvider provider(fixture);
  return run_accuracy(load_dataset(dataset_path()), make_runner(provider, AgentConfig{}), 4);
}

std::string determinism() {
  const EvalResult a = scripted_run(mock_script());
  const EvalResult b = scripted_run(mock_script());
  require(a.correct() == 10 && b.correct() == 10, "accuracy " + std::to_string(a.correct()) + "/10");
  std::size_t prompts = 0;
  for (std::size_t i = 0; i < a.total(); ++i) {
    require(to_json(a.queries[i].outcome).dump() == to_json(b.queries[i].outcome).dump(),
            "transcripts differ for " + a.queries[i].session_key);
    for (const auto& t : a.queries[i].outcome.transcript) {
      if (t.role != "interpreter") continue;
      ++prompts;
      require(t.prompt.find(describe(a.queries[i].outcome.ged_report)) != std::string::npos &&
                  t.prompt.find("{different_model}") == std::string::npos,
              "interpreter prompt without the distance figure in " + a.queries[i].session_key);
    }
  }
  require(prompts == 10, "expected 10 interpreter prompts, saw " + std::to_string(prompts));

  const auto dir = scratch_dir();
  const auto run = [&](const std::string& name) {
    const auto path = (dir / name).string();
    const CliRun r = eor_cli("bench '" + dataset_path() + "' --mock '" + testing::data_path("mock") +
                             "' --transcripts '" + path + "'");
    require(r.code == 0 && r.out.find("accuracy 10/10") != std::string::npos, "CLI bench output:\n" + r.out);
    return testing::read_file(path);
  };
  require(run("t1.json") == run("t2.json"), "CLI transcript files differ");
  return "bench 10/10 twice, transcripts byte-identical, 10/10 interpreter prompts carry the distance figure";
}

std::string failure_taxonomy() {
  const std::pair<const char*, std::pair<std::size_t, FailureCategory>> cases[] = {
      {"malformed", {2, FailureCategory::kPatchFormat}},
      {"wrong_bound", {5, FailureCategory::kLogicError}},
      {"missing_change", {3, FailureCategory::kIncompleteModel}},
  };
  std::string seen;
  for (const auto& [overlay, expected] : cases) {
    const EvalResult r = scripted_run(mock_script({overlay}));
    const auto& q = r.queries[expected.first - 1];
    require(r.correct() == 9 && q.category == expected.second,
            std::string(overlay) + " classified as " + (q.category ? std::string(to_string(*q.category)) : "none"));
    seen += (seen.empty() ? "" : ", ") + std::string(overlay) + " -> " + std::string(to_string(expected.second));
  }
  return seen;
}

std::set<std::string> keys_of(const json& doc) {
  std::set<std::string> keys;
  for (const auto& [k, _] : doc.items()) keys.insert(k);
  return keys;
}

std::string live_mode() {
  LoopbackEndpoint endpoint(mock_script());
  loopback_urls.push_back(endpoint.url());
  HttpProviderConfig config;
  config.base_url = endpoint.url();
  config.model = "loopback";
  config.timeout = std::chrono::seconds(10);
  HttpChatProvider provider(config);
  EvalResult live = run_accuracy(load_dataset(dataset_path()), make_runner(provider, AgentConfig{}), 2);
  judge_results(live, provider);
  EvalResult scripted = scripted_run(mock_script());
  ScriptedProvider judge(mock_script());
  judge_results(scripted, judge);
  const json live_doc = report_json(live, true);
  const json scripted_doc = report_json(scripted, false);
  require(keys_of(live_doc) == keys_of(scripted_doc), "report documents have different columns");
  require(keys_of(live_doc["queries"][0]) == keys_of(scripted_doc["queries"][0]), "query rows differ in columns");
  require(live_doc["mode"] == "live" && live_doc["reproducible"] == false, "live report not marked");
  require(live.correct() == 10, "live replay scored " + std::to_string(live.correct()) + "/10; first failure: " +
                                    (live.queries[0].outcome.failure ? live.queries[0].outcome.failure->detail : ""));
  require(report_table(live, true).find("not reproducible") != std::string::npos, "table lacks the live-run note");

  const CliRun cli = eor_cli("--provider " + endpoint.url() + " --provider-model loopback bench '" + dataset_path() + "'");
  require(cli.code == 0 && cli.out.find("accuracy 10/10") != std::string::npos &&
              cli.out.find("judge EOR: EC 9.00  ER 8.00  Overall 9.00") != std::string::npos &&
              cli.out.find("not reproducible") != std::string::npos,
          "CLI live run output:\n" + cli.out);
  return "HTTP provider run emits the scripted report columns, flagged non-reproducible (" +
         std::to_string(endpoint.requests()) + " loopback requests)";
}

std::string no_network() {
  require(!loopback_urls.empty(), "live check did not run");
  for (const auto& url : loopback_urls) require(url.rfind("http://127.0.0.1:", 0) == 0, "non-loopback URL " + url);
  return "only scripted fixtures and 127.0.0.1 endpoints were used";
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<std::string()>> criteria[] = {
      {"truth-label reproduction", truth_labels},
      {"decision-information values", decision_information_values},
      {"oracle suites", oracle_suites},
      {"end-to-end determinism", determinism},
      {"failure taxonomy", failure_taxonomy},
      {"live-run mode", live_mode},
      {"no network access", no_network},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    try {
      const std::string detail = check();
      std::cout << "PASS  " << name << ": " << detail << std::endl;
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "FAIL  " << name << ": " << e.what() << std::endl;
    }
  }
  std::filesystem::remove_all(scratch_dir());
  return failed == 0 ? 0 : 1;
}
