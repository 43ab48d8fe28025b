// SPDX-License-Identifier: Apache-2.0

// Commander / Writer / Safeguard workflow as an explicit state machine over a
// ChatProvider. One session answers one what-if query against one model.

#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eor/graph.hpp"
#include "eor/model.hpp"
#include "eor/patch.hpp"
#include "eor/provider.hpp"
#include "eor/solver.hpp"

namespace eor {

enum class Phase { kAwaitQuery, kWriterPatch, kSafeguardCheck, kDebug, kSolve, kInterpret, kDone, kFailed };

[[nodiscard]] std::string_view to_string(Phase phase);

// True when the workflow allows moving from `from` to `to`.
[[nodiscard]] bool transition_allowed(Phase from, Phase to);

enum class ShotMode { kZero, kOne };

struct AgentConfig {
  ShotMode shot_mode = ShotMode::kZero;
  std::size_t debug_limit = 3;
  std::string example_qa;  // used in one-shot mode
  double temperature = 0.0;
  std::size_t max_tokens = 2048;
  std::chrono::milliseconds session_timeout{std::chrono::minutes(5)};
  // Routing key for scripted providers.
  std::string session_key;
  MilpBudget solver_budget;
};

enum class FailureKind {
  kPatchFormat,   // no well-formed patch could be extracted or parsed
  kUnsafe,        // safeguard or static gate rejected the patch
  kApplyError,    // patch could not be applied or changed the variables
  kParseError,    // patched model failed to parse
  kSolveError,    // solver hit its budget
  kProvider,      // provider call failed
  kTimeout,       // session wall-clock limit reached
};

[[nodiscard]] std::string_view to_string(FailureKind kind);

struct SessionFailure {
  FailureKind kind = FailureKind::kProvider;
  std::string detail;
};

struct TranscriptEntry {
  std::string role;  // "writer", "safeguard" or "interpreter"
  std::string prompt;
  std::string response;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct InterpretResult {
  std::string explanation_correctness;
  std::string explanation_results;
  bool headers_found = false;
  std::optional<int> impact_rating;
};

struct SessionOutcome {
  Phase phase = Phase::kAwaitQuery;  // kDone or kFailed once finished
  std::optional<SessionFailure> failure;
  std::size_t retry_count = 0;
  std::string query;
  std::string original_source;
  std::optional<QueryPatch> patch;
  std::string updated_source;
  Solution original_solution;
  Solution updated_solution;
  GedReport ged_report;
  InterpretResult interpretation;
  std::vector<TranscriptEntry> transcript;
  std::vector<Phase> phases;  // every phase entered, in order

  [[nodiscard]] bool ok() const { return phase == Phase::kDone; }
};

using PhaseObserver = std::function<void(Phase)>;

// Runs steps 1-8 of the workflow. Never throws for provider, patch or solver
// problems; those end in kFailed with a categorized reason.
[[nodiscard]] SessionOutcome commander_run(const LinearModel& model, const std::string& query,
                                           const AgentConfig& config, ChatProvider& provider,
                                           const PhaseObserver& observer = {});

// First well-formed patch document in `response`: a fenced block or a bare
// JSON object. Throws PatchError(kMalformedDocument) when none is found.
[[nodiscard]] QueryPatch extract_patch(std::string_view response);

// Lines of the patch that fall outside the model language. Empty when the
// patch passes the static gate.
[[nodiscard]] std::vector<std::string> static_gate(const QueryPatch& patch);

// SAFE only when no snippet is judged DANGER and every snippet (or a single
// one-word answer) is judged SAFE. Anything else fails closed.
[[nodiscard]] bool parse_safeguard_verdict(std::string_view response, std::size_t snippet_count);

// Splits an interpreter response at its two section headers and extracts an
// optional 1-10 impact rating.
[[nodiscard]] InterpretResult parse_interpretation(std::string_view response);

// Short text forms used inside prompts and CLI output.
[[nodiscard]] std::string describe(const Solution& solution);
[[nodiscard]] std::string describe(const GedReport& report);

// Reference card for the model language, passed as the Writer's documentation.
[[nodiscard]] std::string_view dsl_reference();

}  // namespace eor
