// SPDX-License-Identifier: Apache-2.0

#include "eor/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "eor/patch.hpp"
#include "eor/templates.hpp"

namespace eor {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw DatasetError(where + ": missing \"" + key + "\"");
  return *it;
}

double finite_number(const json& value, const std::string& where) {
  if (!value.is_number() || !std::isfinite(value.get<double>())) {
    throw DatasetError(where + " must be a finite number");
  }
  return value.get<double>();
}

BenchmarkProblem parse_problem(const json& doc, std::size_t index) {
  const std::string where = "problem " + std::to_string(index + 1);
  if (!doc.is_object()) throw DatasetError(where + " is not an object");
  BenchmarkProblem p;
  try {
    p.id = require(doc, "id", where).get<std::string>();
    p.description = doc.value("description", std::string());
    p.model_source = require(doc, "model", where).get<std::string>();
  } catch (const json::type_error&) {
    throw DatasetError(where + ": id, description and model must be strings");
  }
  p.base_truth = finite_number(require(doc, "base_truth", where), where + " base_truth");
  try {
    (void)parse_model(p.model_source);
  } catch (const ModelError& e) {
    throw DatasetError(where + " (" + p.id + "): model does not parse: " + e.what());
  }
  const json& queries = require(doc, "queries", where);
  if (!queries.is_array() || queries.empty()) throw DatasetError(where + ": queries must be a non-empty array");
  for (std::size_t k = 0; k < queries.size(); ++k) {
    const std::string qwhere = where + " query " + std::to_string(k + 1);
    const json& q = queries[k];
    if (!q.is_object()) throw DatasetError(qwhere + " is not an object");
    BenchmarkQuery query;
    const json& text = require(q, "text", qwhere);
    if (!text.is_string()) throw DatasetError(qwhere + ": text must be a string");
    query.text = text.get<std::string>();
    query.truth_label = finite_number(require(q, "truth_label", qwhere), qwhere + " truth_label");
    if (const auto it = q.find("expected_patch_keys"); it != q.end()) {
      if (!it->is_array()) throw DatasetError(qwhere + ": expected_patch_keys must be an array");
      for (const auto& key : *it) {
        const auto name = key.is_string() ? key.get<std::string>() : std::string();
        if (name != kDeleteConstraintKey && name != kAddConstraintKey && name != kAddDataKey) {
          throw DatasetError(qwhere + ": unknown patch key " + key.dump());
        }
        query.expected_patch_keys.push_back(name);
      }
    }
    p.queries.push_back(std::move(query));
  }
  return p;
}

bool same_after_rounding(double a, double b) { return std::round(a) == std::round(b); }

std::size_t lines_for_key(const QueryPatch& patch, std::string_view key) {
  const std::optional<std::string>* snippet = nullptr;
  if (key == kDeleteConstraintKey) snippet = &patch.delete_constraint;
  if (key == kAddConstraintKey) snippet = &patch.add_constraint;
  if (key == kAddDataKey) snippet = &patch.add_data;
  return snippet != nullptr && snippet->has_value() ? effective_lines(**snippet).size() : 0;
}

QueryResult evaluate(const BenchmarkProblem& problem, std::size_t index, const LinearModel& model,
                     const SessionRunner& runner) {
  const BenchmarkQuery& query = problem.queries[index];
  QueryResult r;
  r.problem_id = problem.id;
  r.query_index = index + 1;
  r.session_key = session_key(problem, index + 1);
  r.truth_label = query.truth_label;
  try {
    r.outcome = runner(model, query.text, r.session_key);
  } catch (const std::exception& e) {
    r.outcome.query = query.text;
    r.outcome.phase = Phase::kFailed;
    r.outcome.failure = SessionFailure{FailureKind::kSolveError, std::string("runner error: ") + e.what()};
  }
  if (!r.outcome.ok()) {
    r.status = QueryStatus::kFailed;
    r.category = classify_failure(r.outcome, query);
    return r;
  }
  if (r.outcome.updated_solution.status == SolveStatus::kOptimal) {
    r.objective = r.outcome.updated_solution.objective;
    if (same_after_rounding(*r.objective, query.truth_label)) {
      r.status = QueryStatus::kCorrect;
      return r;
    }
  }
  r.status = QueryStatus::kWrongResult;
  r.category = classify_failure(r.outcome, query);
  return r;
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

std::vector<BenchmarkProblem> parse_dataset(const json& doc) {
  std::vector<BenchmarkProblem> out;
  if (doc.is_array()) {
    if (doc.empty()) throw DatasetError("dataset is empty");
    for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(parse_problem(doc[i], i));
  } else {
    out.push_back(parse_problem(doc, 0));
  }
  std::set<std::string> ids;
  for (const auto& p : out) {
    if (!ids.insert(p.id).second) throw DatasetError("duplicate problem id " + p.id);
  }
  return out;
}

std::vector<BenchmarkProblem> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path);
  try {
    return parse_dataset(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DatasetError("dataset " + path + ": " + e.what());
  }
}

std::string session_key(const BenchmarkProblem& problem, std::size_t query_index) {
  return problem.id + "/q" + std::to_string(query_index);
}

std::string_view to_string(QueryStatus status) {
  switch (status) {
    case QueryStatus::kCorrect: return "correct";
    case QueryStatus::kWrongResult: return "wrong-result";
    case QueryStatus::kFailed: return "failed";
  }
  return "unknown";
}

std::string_view to_string(FailureCategory category) {
  switch (category) {
    case FailureCategory::kPatchFormat: return "patch-format";
    case FailureCategory::kLogicError: return "logic-error";
    case FailureCategory::kIncompleteModel: return "incomplete-model";
    case FailureCategory::kApplyError: return "apply-error";
    case FailureCategory::kParseError: return "parse-error";
    case FailureCategory::kSolveError: return "solve-error";
  }
  return "unknown";
}

std::size_t EvalResult::correct() const {
  return static_cast<std::size_t>(std::count_if(queries.begin(), queries.end(), [](const QueryResult& q) {
    return q.status == QueryStatus::kCorrect;
  }));
}

double EvalResult::accuracy() const {
  return queries.empty() ? 0.0 : static_cast<double>(correct()) / static_cast<double>(total());
}

std::size_t EvalResult::count(FailureCategory category) const {
  return static_cast<std::size_t>(std::count_if(queries.begin(), queries.end(), [&](const QueryResult& q) {
    return q.category == category;
  }));
}

SessionRunner make_runner(ChatProvider& provider, AgentConfig config) {
  return [&provider, config](const LinearModel& model, const std::string& query, const std::string& key) {
    AgentConfig c = config;
    c.session_key = key;
    return commander_run(model, query, c, provider);
  };
}

EvalResult run_accuracy(const std::vector<BenchmarkProblem>& dataset, const SessionRunner& runner,
                        std::size_t parallelism) {
  std::vector<LinearModel> models;
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t p = 0; p < dataset.size(); ++p) {
    models.push_back(parse_model(dataset[p].model_source));
    for (std::size_t q = 0; q < dataset[p].queries.size(); ++q) tasks.emplace_back(p, q);
  }
  EvalResult result;
  result.queries.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto [p, q] = tasks[i];
      result.queries[i] = evaluate(dataset[p], q, models[p], runner);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(tasks.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return result;
}

FailureCategory classify_failure(const SessionOutcome& outcome, const BenchmarkQuery& query) {
  if (outcome.failure) {
    switch (outcome.failure->kind) {
      case FailureKind::kPatchFormat: return FailureCategory::kPatchFormat;
      case FailureKind::kUnsafe:
      case FailureKind::kApplyError: return FailureCategory::kApplyError;
      case FailureKind::kParseError: return FailureCategory::kParseError;
      case FailureKind::kSolveError:
      case FailureKind::kProvider:
      case FailureKind::kTimeout: return FailureCategory::kSolveError;
    }
  }
  if (outcome.patch && !query.expected_patch_keys.empty()) {
    for (const auto& key : std::set<std::string>(query.expected_patch_keys.begin(), query.expected_patch_keys.end())) {
      const auto needed = static_cast<std::size_t>(
          std::count(query.expected_patch_keys.begin(), query.expected_patch_keys.end(), key));
      if (lines_for_key(*outcome.patch, key) < needed) return FailureCategory::kIncompleteModel;
    }
  }
  return FailureCategory::kLogicError;
}

JudgeScores parse_judge_scores(std::string_view response, const std::vector<std::string>& labels) {
  if (labels.empty()) throw JudgeError("no method labels to judge");
  const auto open = response.find('{');
  const auto close = response.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw JudgeError("judge response holds no JSON object");
  }
  json doc;
  try {
    doc = json::parse(response.substr(open, close - open + 1));
  } catch (const json::parse_error& e) {
    throw JudgeError(std::string("judge response is not valid JSON: ") + e.what());
  }
  const std::set<std::string> wanted(labels.begin(), labels.end());
  JudgeScores scores;
  for (const auto& [label, value] : doc.items()) {
    if (wanted.count(label) == 0) throw JudgeError("unexpected method label " + label);
    if (!value.is_array() || value.size() != 3) throw JudgeError(label + " must map to three scores");
    double s[3];
    for (std::size_t i = 0; i < 3; ++i) {
      if (!value[i].is_number()) throw JudgeError(label + " has a non-numeric score");
      s[i] = value[i].get<double>();
      if (!(s[i] >= 0.0 && s[i] <= 10.0)) throw JudgeError(label + " has a score outside 0-10");
    }
    scores[label] = MethodScores{s[0], s[1], s[2]};
  }
  for (const auto& label : wanted) {
    if (scores.count(label) == 0) throw JudgeError("missing scores for " + label);
  }
  return scores;
}

JudgeScores judge_explanations(const std::string& query, const std::map<std::string, std::string>& explanations,
                               ChatProvider& provider, const std::string& session, double temperature) {
  if (explanations.empty()) throw JudgeError("no explanations to judge");
  std::vector<std::string> labels;
  std::string label_list;
  std::string blocks;
  for (const auto& [label, text] : explanations) {
    labels.push_back(label);
    label_list += (label_list.empty() ? "" : ", ") + label;
    blocks += "    - Explanation from " + label + ":\n" + text + "\n";
  }
  ProviderRequest request;
  request.messages = {{"user", render(TemplateId::kJudge,
                                      {{"labels", label_list}, {"query", query}, {"explanations", blocks}})}};
  request.temperature = temperature;
  request.session = session;
  request.step = "judge";
  return parse_judge_scores(provider.complete(request).text, labels);
}

void judge_results(EvalResult& result, ChatProvider& judge, const std::string& label) {
  for (auto& q : result.queries) {
    // Explanations built on a wrong result are not judged.
    if (q.status != QueryStatus::kCorrect) continue;
    const auto& in = q.outcome.interpretation;
    const std::string text = "Explanation of Updated Code:\n" + in.explanation_correctness +
                             "\n\nExplanation of Query on Results:\n" + in.explanation_results;
    try {
      q.judge = judge_explanations(q.outcome.query, {{label, text}}, judge, q.session_key);
    } catch (const ProviderError& e) {
      q.judge_failure = std::string("judge provider failed: ") + e.what();
    } catch (const JudgeError& e) {
      q.judge_failure = e.what();
    }
  }
}

std::map<std::string, JudgeMeans> judge_means(const EvalResult& result) {
  std::map<std::string, JudgeMeans> means;
  for (const auto& q : result.queries) {
    if (!q.judge) continue;
    for (const auto& [label, s] : *q.judge) {
      auto& m = means[label];
      m.mean.ec += s.ec;
      m.mean.er += s.er;
      m.mean.overall += s.overall;
      ++m.judged;
    }
  }
  for (auto& [label, m] : means) {
    const auto n = static_cast<double>(m.judged);
    m.mean = MethodScores{m.mean.ec / n, m.mean.er / n, m.mean.overall / n};
  }
  return means;
}

json report_json(const EvalResult& result, bool live) {
  json categories = json::object();
  for (const auto c : kAllCategories) categories[std::string(to_string(c))] = result.count(c);
  json judge = json::object();
  for (const auto& [label, m] : judge_means(result)) {
    judge[label] = {{"ec", m.mean.ec}, {"er", m.mean.er}, {"overall", m.mean.overall}, {"judged", m.judged}};
  }
  json queries = json::array();
  for (const auto& q : result.queries) {
    queries.push_back({{"problem", q.problem_id},
                       {"query", q.query_index},
                       {"session", q.session_key},
                       {"status", to_string(q.status)},
                       {"objective", q.objective ? json(*q.objective) : json(nullptr)},
                       {"truth_label", q.truth_label},
                       {"category", q.category ? json(to_string(*q.category)) : json(nullptr)},
                       {"failure", q.outcome.failure ? json(q.outcome.failure->detail) : json(nullptr)},
                       {"retry_count", q.outcome.retry_count},
                       {"judge_failure", q.judge_failure.empty() ? json(nullptr) : json(q.judge_failure)}});
  }
  return {{"mode", live ? "live" : "scripted"},
          {"reproducible", !live},
          {"total", result.total()},
          {"correct", result.correct()},
          {"accuracy", result.accuracy()},
          {"categories", categories},
          {"judge", judge},
          {"queries", queries}};
}

std::string report_table(const EvalResult& result, bool live) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "problem" << std::setw(7) << "query" << std::setw(14) << "status"
      << std::setw(14) << "objective" << std::setw(14) << "truth" << "category\n";
  for (const auto& q : result.queries) {
    out << std::setw(14) << q.problem_id << std::setw(7) << ("q" + std::to_string(q.query_index))
        << std::setw(14) << to_string(q.status) << std::setw(14)
        << (q.objective ? format_number(std::round(*q.objective)) : "-") << std::setw(14)
        << format_number(std::round(q.truth_label)) << (q.category ? to_string(*q.category) : "-") << "\n";
  }
  out << "\naccuracy " << result.correct() << "/" << result.total() << " (" << fixed(100.0 * result.accuracy(), 2)
      << "%)\n";
  out << "failures";
  for (const auto c : kAllCategories) out << "  " << to_string(c) << " " << result.count(c);
  out << "\n";
  const auto means = judge_means(result);
  if (means.empty()) {
    out << "judge: not run\n";
  } else {
    for (const auto& [label, m] : means) {
      out << "judge " << label << ": EC " << fixed(m.mean.ec, 2) << "  ER " << fixed(m.mean.er, 2) << "  Overall "
          << fixed(m.mean.overall, 2) << "  (" << m.judged << " judged)\n";
    }
  }
  out << "note: incomplete-model is inferred from the dataset's expected patch keys\n";
  if (live) out << "note: live provider run; figures depend on the provider and are not reproducible\n";
  return out.str();
}

}  // namespace eor
