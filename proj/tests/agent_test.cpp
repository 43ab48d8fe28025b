// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <set>

#include <gtest/gtest.h>
#include <json.hpp>

#include "eor/agent.hpp"
#include "eor/templates.hpp"
#include "test_util.hpp"

namespace eor {
namespace {

using nlohmann::json;
using testing::aircraft_source;

const std::string kQuery5 =
    "Limit the fleet to no more than 15 Type A aircraft and no more than 30 Type B aircraft.";
const std::string kFleetPatch = R"({"ADD CONSTRAINT": "MaxTypeA: A <= 15\nMaxTypeB: B <= 30"})";
const std::string kExplanation =
    "**Explanation of the Updated Code:**\nTwo caps were added.\n\n"
    "**Explanation of the Query on Results:**\nThe cost rises by $15,000. "
    "On a scale from 1 to 10 the impact is around an 8.";

json script(json writer, json safeguard = "SAFE", json interpreter = kExplanation) {
  return {{"sessions", {{"s", {{"writer", writer}, {"safeguard", safeguard}, {"interpreter", interpreter}}}}}};
}

AgentConfig config() {
  AgentConfig c;
  c.session_key = "s";
  return c;
}

SessionOutcome run(const json& fixture, const AgentConfig& c = config()) {
  ScriptedProvider provider(fixture);
  return commander_run(parse_model(aircraft_source()), kQuery5, c, provider);
}

TEST(Commander, FleetLimitQueryEndToEnd) {
  const SessionOutcome out = run(script(kFleetPatch));
  ASSERT_TRUE(out.ok()) << (out.failure ? out.failure->detail : "");
  EXPECT_EQ(out.retry_count, 0u);
  EXPECT_EQ(out.original_solution.objective, 200000);
  EXPECT_EQ(out.updated_solution.objective, 215000);
  EXPECT_EQ(out.ged_report.ged, 6u);
  EXPECT_NEAR(out.ged_report.nged, 0.3, 1e-12);
  EXPECT_EQ(out.interpretation.impact_rating, 8);
  EXPECT_TRUE(out.interpretation.headers_found);
  EXPECT_EQ(out.interpretation.explanation_correctness, "Two caps were added.");
  EXPECT_EQ(out.phases, (std::vector<Phase>{Phase::kAwaitQuery, Phase::kWriterPatch, Phase::kSafeguardCheck,
                                            Phase::kSolve, Phase::kInterpret, Phase::kDone}));
  ASSERT_EQ(out.transcript.size(), 3u);
  EXPECT_EQ(out.transcript[0].role, "writer");
  EXPECT_EQ(out.transcript[1].role, "safeguard");
  EXPECT_EQ(out.transcript[2].role, "interpreter");
  EXPECT_NE(out.transcript[2].prompt.find("GED=6 NGED=0.300"), std::string::npos);
  EXPECT_NE(out.transcript[0].prompt.find(kQuery5), std::string::npos);
}

TEST(Commander, MalformedPatchThenValidRetriesOnce) {
  const SessionOutcome out = run(script(json::array({"I think we should cap the fleet.", kFleetPatch})));
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out.retry_count, 1u);
  EXPECT_EQ(out.updated_solution.objective, 215000);
  // The debug prompt names the error.
  EXPECT_NE(out.transcript[1].prompt.find("malformed-document"), std::string::npos);
  EXPECT_NE(out.transcript[1].prompt.find("no JSON patch found"), std::string::npos);
}

TEST(Commander, SafeguardDangerExhaustsDebugLimit) {
  const SessionOutcome out = run(script(kFleetPatch, "DANGER"));
  EXPECT_EQ(out.phase, Phase::kFailed);
  ASSERT_TRUE(out.failure.has_value());
  EXPECT_EQ(out.failure->kind, FailureKind::kUnsafe);
  EXPECT_EQ(out.retry_count, 3u);
  EXPECT_EQ(std::count(out.phases.begin(), out.phases.end(), Phase::kSafeguardCheck), 4);
}

TEST(Commander, DebugLimitIsConfigurable) {
  AgentConfig c = config();
  c.debug_limit = 0;
  const SessionOutcome out = run(script("no patch here"), c);
  EXPECT_EQ(out.phase, Phase::kFailed);
  EXPECT_EQ(out.failure->kind, FailureKind::kPatchFormat);
  EXPECT_EQ(out.retry_count, 0u);
}

TEST(Commander, ApplyErrorsFeedTheDebugLoop) {
  const json writer = json::array({R"({"DELETE CONSTRAINT": "Missing: A <= 3"})",
                                   R"({"ADD CONSTRAINT": "Third: A + C <= 4"})", kFleetPatch});
  const SessionOutcome out = run(script(writer));
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out.retry_count, 2u);
  EXPECT_NE(out.transcript[2].prompt.find("delete-target-missing"), std::string::npos);
  EXPECT_NE(out.transcript[4].prompt.find("snippet-parse-error"), std::string::npos);
}

TEST(Commander, FinalFailureCarriesLastCategory) {
  const SessionOutcome out = run(script(R"({"ADD DATA": "param x = (1"})"));
  EXPECT_EQ(out.phase, Phase::kFailed);
  EXPECT_EQ(out.failure->kind, FailureKind::kParseError);
}

TEST(Commander, ProviderFailureEndsSession) {
  json fixture = script(kFleetPatch);
  fixture["sessions"]["s"].erase("interpreter");
  const SessionOutcome out = run(fixture);
  EXPECT_EQ(out.phase, Phase::kFailed);
  EXPECT_EQ(out.failure->kind, FailureKind::kProvider);
}

TEST(Commander, SessionTimeout) {
  AgentConfig c = config();
  c.session_timeout = std::chrono::milliseconds(-1);
  const SessionOutcome out = run(script(kFleetPatch), c);
  EXPECT_EQ(out.phase, Phase::kFailed);
  EXPECT_EQ(out.failure->kind, FailureKind::kTimeout);
}

TEST(Commander, OneShotIncludesExample) {
  AgentConfig c = config();
  c.shot_mode = ShotMode::kOne;
  c.example_qa = "Q: raise demand to 12000\nA: {\"ADD DATA\": \"param demand = 12000\"}";
  const SessionOutcome one = run(script(kFleetPatch), c);
  EXPECT_NE(one.transcript[0].prompt.find("raise demand to 12000"), std::string::npos);
  const SessionOutcome zero = run(script(kFleetPatch));
  EXPECT_EQ(zero.transcript[0].prompt.find("raise demand to 12000"), std::string::npos);
}

TEST(Commander, TemperatureReachesProvider) {
  ScriptedProvider provider(script(kFleetPatch));
  AgentConfig c = config();
  c.temperature = 0.5;
  (void)commander_run(parse_model(aircraft_source()), kQuery5, c, provider);
  for (const auto& r : provider.requests()) EXPECT_EQ(r.temperature, 0.5);
  EXPECT_EQ(AgentConfig{}.temperature, 0.0);
}

TEST(Commander, ObserverSeesPhases) {
  ScriptedProvider provider(script(kFleetPatch));
  std::vector<Phase> seen;
  const auto out = commander_run(parse_model(aircraft_source()), kQuery5, config(), provider,
                                 [&](Phase p) { seen.push_back(p); });
  EXPECT_EQ(std::vector<Phase>(out.phases.begin() + 1, out.phases.end()), seen);
}

TEST(Commander, DeterministicTranscripts) {
  const SessionOutcome a = run(script(json::array({"oops", kFleetPatch})));
  const SessionOutcome b = run(script(json::array({"oops", kFleetPatch})));
  EXPECT_EQ(a.transcript, b.transcript);
  EXPECT_EQ(a.updated_source, b.updated_source);
}

TEST(Commander, RenderedPromptsHaveNoPlaceholderResidue) {
  const SessionOutcome out = run(script(json::array({"oops", kFleetPatch})));
  ASSERT_TRUE(out.ok());
  for (const auto& entry : out.transcript) {
    EXPECT_TRUE(placeholders(entry.prompt).empty()) << entry.role;
  }
}

// Random scripts drawn from good, bad and unsafe responses; every run must
// follow the workflow edges and end in a consistent terminal state.
TEST(Commander, StateMachineSafetyUnderRandomScripts) {
  const std::vector<std::string> writers = {kFleetPatch, "prose", R"({"UPDATE": "x"})",
                                            R"({"ADD CONSTRAINT": "Bad: A + Z <= 1"})",
                                            R"({"ADD DATA": "param costA = 8000"})",
                                            R"({"ADD CONSTRAINT": "Evil: A <= 1; rm -rf /"})"};
  const std::vector<std::string> verdicts = {"SAFE", "DANGER", "maybe", "For snippet_1: SAFE"};
  std::mt19937 rng(3);
  const LinearModel model = parse_model(aircraft_source());
  for (int trial = 0; trial < 150; ++trial) {
    json w = json::array(), v = json::array();
    for (int k = 0; k < 5; ++k) {
      w.push_back(writers[rng() % writers.size()]);
      v.push_back(verdicts[rng() % verdicts.size()]);
    }
    ScriptedProvider provider(script(w, v));
    AgentConfig c = config();
    c.debug_limit = rng() % 4;
    const SessionOutcome out = commander_run(model, kQuery5, c, provider);
    for (std::size_t i = 1; i < out.phases.size(); ++i) {
      ASSERT_TRUE(transition_allowed(out.phases[i - 1], out.phases[i]))
          << to_string(out.phases[i - 1]) << " -> " << to_string(out.phases[i]);
    }
    EXPECT_LE(out.retry_count, c.debug_limit);
    if (out.ok()) {
      EXPECT_TRUE(out.patch.has_value());
      EXPECT_EQ(out.updated_solution.status, SolveStatus::kOptimal);
      EXPECT_FALSE(out.interpretation.explanation_results.empty());
    } else {
      ASSERT_EQ(out.phase, Phase::kFailed);
      ASSERT_TRUE(out.failure.has_value());
      if (out.failure->kind != FailureKind::kProvider) {
        EXPECT_EQ(out.retry_count, c.debug_limit);
      }
    }
  }
}

TEST(ExtractPatch, BareFencedAndProse) {
  EXPECT_TRUE(extract_patch(kFleetPatch).add_constraint.has_value());
  const auto fenced = extract_patch("Here you go:\n```json\n" + kFleetPatch + "\n```\nDone.");
  EXPECT_EQ(*fenced.add_constraint, "MaxTypeA: A <= 15\nMaxTypeB: B <= 30");
  EXPECT_TRUE(extract_patch("Sure. " + kFleetPatch + " Hope it helps {").add_constraint.has_value());
  try {
    (void)extract_patch("Just cap type A at 15.");
    FAIL();
  } catch (const PatchError& e) {
    EXPECT_EQ(e.violation().kind, ViolationKind::kMalformedDocument);
  }
  try {
    (void)extract_patch(R"({"UPDATE OBJECTIVE": "x"})");
    FAIL();
  } catch (const PatchError& e) {
    EXPECT_EQ(e.violation().kind, ViolationKind::kUnknownKey);
  }
}

TEST(Safeguard, VerdictParsing) {
  EXPECT_TRUE(parse_safeguard_verdict("SAFE", 2));
  EXPECT_TRUE(parse_safeguard_verdict(" safe.\n", 1));
  EXPECT_TRUE(parse_safeguard_verdict("For snippet_1: SAFE, for snippet_2: SAFE", 2));
  EXPECT_FALSE(parse_safeguard_verdict("For snippet_1: SAFE, for snippet_2: DANGER", 2));
  EXPECT_FALSE(parse_safeguard_verdict("For snippet_1: SAFE", 2));
  EXPECT_FALSE(parse_safeguard_verdict("I am not sure", 1));
  EXPECT_FALSE(parse_safeguard_verdict("NOT SAFE", 1));
  EXPECT_FALSE(parse_safeguard_verdict("unsafe", 1));
  EXPECT_FALSE(parse_safeguard_verdict("", 1));
}

TEST(Safeguard, StaticGateRejectsNonModelLines) {
  QueryPatch ok;
  ok.add_constraint = "# cap\nMaxTypeA: A <= 15";
  ok.add_data = "param costA = costA * 1.1";
  EXPECT_TRUE(static_gate(ok).empty());
  QueryPatch bad;
  bad.add_constraint = "MaxTypeA: A <= 15\nimport os; os.system('rm -rf /')";
  bad.add_data = "costA = 3";
  const auto rejected = static_gate(bad);
  ASSERT_EQ(rejected.size(), 2u);
  EXPECT_EQ(rejected[0], "costA = 3");
}

TEST(Safeguard, StaticGateOverridesProvider) {
  const SessionOutcome out = run(script(R"({"ADD CONSTRAINT": "X: A <= 1\n!shell reboot"})", "SAFE"));
  EXPECT_EQ(out.phase, Phase::kFailed);
  EXPECT_EQ(out.failure->kind, FailureKind::kUnsafe);
  // The provider's safety review is never consulted for gated patches.
  for (const auto& t : out.transcript) EXPECT_NE(t.role, "safeguard");
}

TEST(Interpretation, SplitAndRating) {
  const InterpretResult r = parse_interpretation(kExplanation);
  EXPECT_TRUE(r.headers_found);
  EXPECT_EQ(r.explanation_correctness, "Two caps were added.");
  EXPECT_EQ(r.explanation_results.rfind("The cost rises", 0), 0u);
  EXPECT_EQ(r.impact_rating, 8);
  EXPECT_EQ(parse_interpretation("Impact: 7/10").impact_rating, 7);
  EXPECT_EQ(parse_interpretation("rated on a scale from 1 to 10").impact_rating, std::nullopt);
  EXPECT_EQ(parse_interpretation("I would rate it 9 out of 10.").impact_rating, 9);
}

TEST(Interpretation, MissingHeadersKeepFullText) {
  const InterpretResult r = parse_interpretation("Costs went up.");
  EXPECT_FALSE(r.headers_found);
  EXPECT_EQ(r.explanation_correctness, "Costs went up.");
  EXPECT_EQ(r.explanation_results, "Costs went up.");
  EXPECT_FALSE(r.impact_rating.has_value());
}

TEST(Templates, PlaceholderSets) {
  using V = std::vector<std::string>;
  EXPECT_EQ(placeholders(template_text(TemplateId::kWriterSystem)),
            (V{"description", "source_code", "doc_str", "example_qa", "execution_result"}));
  EXPECT_EQ(placeholders(template_text(TemplateId::kCode)), (V{"query"}));
  EXPECT_EQ(placeholders(template_text(TemplateId::kDebug)), (V{"error_type", "error_message"}));
  EXPECT_EQ(placeholders(template_text(TemplateId::kInterpreter)),
            (V{"source_code", "new_code", "json_data", "original_execution_result", "execution_rst",
               "different_model"}));
  EXPECT_EQ(placeholders(template_text(TemplateId::kSafeguardSystem)), (V{"source_code"}));
  EXPECT_TRUE(placeholders(template_text(TemplateId::kSafeguard)).empty());
  EXPECT_EQ(placeholders(template_text(TemplateId::kJudge)), (V{"labels", "query", "explanations"}));
}

TEST(Templates, EveryTemplateRendersCompletely) {
  for (const TemplateId id : kAllTemplates) {
    std::map<std::string, std::string> values;
    for (const auto& name : placeholders(template_text(id))) values[name] = "<" + name + ">";
    const std::string text = render(id, values);
    EXPECT_TRUE(placeholders(text).empty()) << template_name(id);
    for (const auto& [name, value] : values) EXPECT_NE(text.find(value), std::string::npos);
  }
}

TEST(Templates, MissingValueIsAnError) {
  EXPECT_THROW((void)render(TemplateId::kDebug, {{"error_type", "x"}}), TemplateError);
}

TEST(Templates, SubstitutionIsSinglePass) {
  EXPECT_EQ(render("a {x} b", {{"x", "{y}"}}), "a {y} b");
  EXPECT_EQ(render("json {\"k\": 1} {x}", {{"x", "v"}}), "json {\"k\": 1} v");
}

TEST(Describe, SolutionAndReport) {
  const Solution s = solve_milp(parse_model(aircraft_source()));
  EXPECT_EQ(describe(s), "Optimal objective 200000 (A = 20, B = 0)");
  const GedReport r = decision_information(parse_model(aircraft_source()),
                                           parse_model(testing::aircraft_variant(5)));
  EXPECT_EQ(describe(r).rfind("GED=6 NGED=0.300 (graph sizes 14 -> 20)", 0), 0u);
}

}  // namespace
}  // namespace eor
