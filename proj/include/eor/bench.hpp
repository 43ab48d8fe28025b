// SPDX-License-Identifier: Apache-2.0

// Benchmark datasets, modeling-accuracy scoring, failure classification and
// judged explanation quality.

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eor/agent.hpp"
#include "eor/provider.hpp"

namespace eor {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchmarkQuery {
  std::string text;
  double truth_label = 0.0;
  // Patch keys the query needs, one entry per required line. Empty disables
  // incomplete-model detection for the query.
  std::vector<std::string> expected_patch_keys;
};

struct BenchmarkProblem {
  std::string id;
  std::string description;
  std::string model_source;
  double base_truth = 0.0;
  std::vector<BenchmarkQuery> queries;
};

// Accepts one problem object or an array of them. Validates that every model
// parses and every truth label is finite.
[[nodiscard]] std::vector<BenchmarkProblem> parse_dataset(const nlohmann::json& doc);
[[nodiscard]] std::vector<BenchmarkProblem> load_dataset(const std::string& path);

// Session key used to route one benchmark query, e.g. "aircraft/q5".
[[nodiscard]] std::string session_key(const BenchmarkProblem& problem, std::size_t query_index);

enum class QueryStatus { kCorrect, kWrongResult, kFailed };
enum class FailureCategory { kPatchFormat, kLogicError, kIncompleteModel, kApplyError, kParseError, kSolveError };

inline constexpr FailureCategory kAllCategories[] = {
    FailureCategory::kPatchFormat, FailureCategory::kLogicError, FailureCategory::kIncompleteModel,
    FailureCategory::kApplyError,  FailureCategory::kParseError, FailureCategory::kSolveError};

[[nodiscard]] std::string_view to_string(QueryStatus status);
[[nodiscard]] std::string_view to_string(FailureCategory category);

// Scores for one method: explanation of correctness, of results, overall.
struct MethodScores {
  double ec = 0.0;
  double er = 0.0;
  double overall = 0.0;

  friend bool operator==(const MethodScores&, const MethodScores&) = default;
};

using JudgeScores = std::map<std::string, MethodScores>;

class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QueryResult {
  std::string problem_id;
  std::size_t query_index = 0;  // 1-based
  std::string session_key;
  double truth_label = 0.0;
  QueryStatus status = QueryStatus::kFailed;
  std::optional<double> objective;
  std::optional<FailureCategory> category;
  SessionOutcome outcome;
  std::optional<JudgeScores> judge;
  std::string judge_failure;
};

struct EvalResult {
  std::vector<QueryResult> queries;

  [[nodiscard]] std::size_t total() const { return queries.size(); }
  [[nodiscard]] std::size_t correct() const;
  [[nodiscard]] double accuracy() const;
  [[nodiscard]] std::size_t count(FailureCategory category) const;
};

using SessionRunner = std::function<SessionOutcome(const LinearModel& model, const std::string& query,
                                                   const std::string& session_key)>;

// Wraps commander_run; each call gets `config` with its own session key.
[[nodiscard]] SessionRunner make_runner(ChatProvider& provider, AgentConfig config);

// Runs every query; results keep dataset order whatever the parallelism.
[[nodiscard]] EvalResult run_accuracy(const std::vector<BenchmarkProblem>& dataset, const SessionRunner& runner,
                                      std::size_t parallelism = 1);

// Category of a result that is not correct.
[[nodiscard]] FailureCategory classify_failure(const SessionOutcome& outcome, const BenchmarkQuery& query);

// Strict: a JSON object whose keys are exactly `labels`, each mapped to three
// numbers in [0, 10].
[[nodiscard]] JudgeScores parse_judge_scores(std::string_view response, const std::vector<std::string>& labels);

// Renders the judge prompt and scores every method's explanation.
[[nodiscard]] JudgeScores judge_explanations(const std::string& query,
                                             const std::map<std::string, std::string>& explanations,
                                             ChatProvider& provider, const std::string& session = {},
                                             double temperature = 0.0);

// Judges the correct results of `result` under `label`. Failures are recorded
// on the query, not thrown.
void judge_results(EvalResult& result, ChatProvider& judge, const std::string& label = "EOR");

struct JudgeMeans {
  MethodScores mean;
  std::size_t judged = 0;
};

[[nodiscard]] std::map<std::string, JudgeMeans> judge_means(const EvalResult& result);

// Structured report and its plain-text table. `live` marks runs against a real
// provider, whose numbers are not reproducible.
[[nodiscard]] nlohmann::json report_json(const EvalResult& result, bool live);
[[nodiscard]] std::string report_table(const EvalResult& result, bool live);

}  // namespace eor
