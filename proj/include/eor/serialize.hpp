// SPDX-License-Identifier: Apache-2.0

// JSON documents for the domain types, shared by the service, the CLI and the
// evaluation report.

#pragma once

#include <json.hpp>

#include "eor/agent.hpp"
#include "eor/graph.hpp"
#include "eor/patch.hpp"
#include "eor/solver.hpp"

namespace eor {

[[nodiscard]] nlohmann::json to_json(const Solution& solution);
[[nodiscard]] nlohmann::json to_json(const GedReport& report);
[[nodiscard]] nlohmann::json to_json(const QueryPatch& patch);
[[nodiscard]] nlohmann::json to_json(const PatchViolation& violation);
[[nodiscard]] nlohmann::json to_json(const AgentConfig& config);
[[nodiscard]] nlohmann::json to_json(const SessionOutcome& outcome);

// Missing fields keep their defaults. Throws std::invalid_argument or
// nlohmann::json::exception on bad values.
[[nodiscard]] AgentConfig agent_config_from_json(const nlohmann::json& doc);

}  // namespace eor
