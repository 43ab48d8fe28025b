// SPDX-License-Identifier: Apache-2.0

#include "eor/serialize.hpp"

#include <stdexcept>

namespace eor {

using nlohmann::json;

json to_json(const Solution& solution) {
  json assignment = json::array();
  for (const auto& [name, value] : solution.assignment) assignment.push_back({{"name", name}, {"value", value}});
  const bool has_point = solution.status == SolveStatus::kOptimal || !solution.assignment.empty();
  return {{"status", to_string(solution.status)},
          {"objective", has_point ? json(solution.objective) : json(nullptr)},
          {"assignment", assignment},
          {"iterations", solution.stats.iterations},
          {"nodes", solution.stats.nodes}};
}

json to_json(const GedReport& report) {
  const auto& b = report.breakdown;
  return {{"ged", report.ged},
          {"nged", report.nged},
          {"size_original", report.size_original},
          {"size_updated", report.size_updated},
          {"breakdown",
           {{"constraint_insert", b.constraint_insert},
            {"constraint_delete", b.constraint_delete},
            {"constraint_substituted_attrs", b.constraint_substituted_attrs},
            {"variable_insert", b.variable_insert},
            {"variable_delete", b.variable_delete},
            {"variable_substituted_attrs", b.variable_substituted_attrs},
            {"edge_insert", b.edge_insert},
            {"edge_delete", b.edge_delete},
            {"edge_substituted", b.edge_substituted}}}};
}

json to_json(const QueryPatch& patch) {
  json doc = json::object();
  if (patch.delete_constraint) doc[std::string(kDeleteConstraintKey)] = *patch.delete_constraint;
  if (patch.add_constraint) doc[std::string(kAddConstraintKey)] = *patch.add_constraint;
  if (patch.add_data) doc[std::string(kAddDataKey)] = *patch.add_data;
  return doc;
}

json to_json(const PatchViolation& violation) {
  return {{"kind", to_string(violation.kind)}, {"detail", violation.detail}};
}

json to_json(const AgentConfig& config) {
  return {{"shot_mode", config.shot_mode == ShotMode::kOne ? "one" : "zero"},
          {"debug_limit", config.debug_limit},
          {"example_qa", config.example_qa},
          {"temperature", config.temperature},
          {"max_tokens", config.max_tokens},
          {"session_timeout_ms", config.session_timeout.count()}};
}

AgentConfig agent_config_from_json(const json& doc) {
  AgentConfig config;
  if (doc.is_null()) return config;
  if (!doc.is_object()) throw std::invalid_argument("config must be an object");
  if (const auto it = doc.find("shot_mode"); it != doc.end()) {
    const auto mode = it->get<std::string>();
    if (mode != "zero" && mode != "one") throw std::invalid_argument("shot_mode must be \"zero\" or \"one\"");
    config.shot_mode = mode == "one" ? ShotMode::kOne : ShotMode::kZero;
  }
  config.debug_limit = doc.value("debug_limit", config.debug_limit);
  config.example_qa = doc.value("example_qa", config.example_qa);
  config.temperature = doc.value("temperature", config.temperature);
  config.max_tokens = doc.value("max_tokens", config.max_tokens);
  config.session_timeout =
      std::chrono::milliseconds(doc.value("session_timeout_ms", config.session_timeout.count()));
  return config;
}

json to_json(const SessionOutcome& outcome) {
  json transcript = json::array();
  for (const auto& t : outcome.transcript) {
    transcript.push_back({{"role", t.role}, {"prompt", t.prompt}, {"response", t.response}});
  }
  json phases = json::array();
  for (const Phase p : outcome.phases) phases.push_back(to_string(p));
  const auto& in = outcome.interpretation;
  const bool solved = outcome.phase == Phase::kDone;
  return {{"phase", to_string(outcome.phase)},
          {"ok", outcome.ok()},
          {"failure", outcome.failure ? json{{"kind", to_string(outcome.failure->kind)},
                                             {"detail", outcome.failure->detail}}
                                      : json(nullptr)},
          {"retry_count", outcome.retry_count},
          {"query", outcome.query},
          {"original_source", outcome.original_source},
          {"patch", outcome.patch ? to_json(*outcome.patch) : json(nullptr)},
          {"updated_source", outcome.updated_source},
          {"original_solution", to_json(outcome.original_solution)},
          {"updated_solution", solved ? to_json(outcome.updated_solution) : json(nullptr)},
          {"ged_report", solved ? to_json(outcome.ged_report) : json(nullptr)},
          {"explanation_correctness", in.explanation_correctness},
          {"explanation_results", in.explanation_results},
          {"impact_rating", in.impact_rating ? json(*in.impact_rating) : json(nullptr)},
          {"transcript", transcript},
          {"phases", phases}};
}

}  // namespace eor
