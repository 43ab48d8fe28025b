// SPDX-License-Identifier: Apache-2.0

#include "eor/agent.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "eor/templates.hpp"

namespace eor {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kAwaitQuery: return "AwaitQuery";
    case Phase::kWriterPatch: return "WriterPatch";
    case Phase::kSafeguardCheck: return "SafeguardCheck";
    case Phase::kDebug: return "Debug";
    case Phase::kSolve: return "Solve";
    case Phase::kInterpret: return "Interpret";
    case Phase::kDone: return "Done";
    case Phase::kFailed: return "Failed";
  }
  return "unknown";
}

bool transition_allowed(Phase from, Phase to) {
  static const std::set<std::pair<Phase, Phase>> kEdges = {
      {Phase::kAwaitQuery, Phase::kWriterPatch},
      {Phase::kWriterPatch, Phase::kSafeguardCheck},
      {Phase::kWriterPatch, Phase::kDebug},
      {Phase::kWriterPatch, Phase::kFailed},
      {Phase::kSafeguardCheck, Phase::kSolve},
      {Phase::kSafeguardCheck, Phase::kDebug},
      {Phase::kSafeguardCheck, Phase::kFailed},
      {Phase::kDebug, Phase::kWriterPatch},
      {Phase::kDebug, Phase::kFailed},
      {Phase::kSolve, Phase::kInterpret},
      {Phase::kSolve, Phase::kDebug},
      {Phase::kSolve, Phase::kFailed},
      {Phase::kInterpret, Phase::kDone},
      {Phase::kInterpret, Phase::kFailed},
  };
  return kEdges.count({from, to}) != 0;
}

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::kPatchFormat: return "patch-format";
    case FailureKind::kUnsafe: return "unsafe";
    case FailureKind::kApplyError: return "apply-error";
    case FailureKind::kParseError: return "parse-error";
    case FailureKind::kSolveError: return "solve-error";
    case FailureKind::kProvider: return "provider";
    case FailureKind::kTimeout: return "timeout";
  }
  return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Index one past the '}' closing the object that opens at text[open], or npos.
std::size_t object_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return i + 1;
    }
  }
  return std::string_view::npos;
}

std::vector<std::string_view> fenced_blocks(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    const auto body = text.find('\n', pos);
    if (body == std::string_view::npos) break;
    const auto close = text.find("```", body);
    if (close == std::string_view::npos) break;
    out.push_back(text.substr(body + 1, close - body - 1));
    pos = close + 3;
  }
  return out;
}

}  // namespace

QueryPatch extract_patch(std::string_view response) {
  std::vector<std::string_view> candidates = fenced_blocks(response);
  candidates.push_back(response);
  std::optional<PatchError> first_error;
  for (const auto text : candidates) {
    for (std::size_t open = text.find('{'); open != std::string_view::npos;
         open = text.find('{', open + 1)) {
      const auto end = object_end(text, open);
      if (end == std::string_view::npos) break;
      const auto doc = text.substr(open, end - open);
      if (!nlohmann::json::accept(doc)) continue;
      try {
        return parse_patch(doc);
      } catch (const PatchError& e) {
        if (!first_error) first_error = e;
      }
      open = end - 1;
    }
  }
  if (first_error) throw *first_error;
  throw PatchError(PatchViolation{ViolationKind::kMalformedDocument, "no JSON patch found in the response"});
}

std::vector<std::string> static_gate(const QueryPatch& patch) {
  static const std::regex kParam(R"(^param\s+[A-Za-z_][A-Za-z0-9_]*\s*=\s*[A-Za-z0-9_.+\-*/() \t]+$)");
  static const std::regex kConstraint(
      R"(^[A-Za-z_][A-Za-z0-9_]*\s*:\s*[A-Za-z0-9_.+\-*/() \t]+(<=|>=|==)[A-Za-z0-9_.+\-*/()<>= \t]+$)");
  std::vector<std::string> rejected;
  const auto check = [&](const std::optional<std::string>& snippet, const std::regex& pattern) {
    if (!snippet) return;
    for (const auto& line : effective_lines(*snippet)) {
      if (!std::regex_match(line, pattern)) rejected.push_back(line);
    }
  };
  check(patch.add_data, kParam);
  check(patch.add_constraint, kConstraint);
  check(patch.delete_constraint, kConstraint);
  return rejected;
}

bool parse_safeguard_verdict(std::string_view response, std::size_t snippet_count) {
  static const std::regex kWord(R"(\b(NOT\s+SAFE|UNSAFE|SAFE|DANGER(OUS)?)\b)", std::regex::icase);
  std::size_t safe = 0;
  const std::string text(response);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kWord); it != std::sregex_iterator(); ++it) {
    std::string word = (*it)[1].str();
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::toupper(c); });
    if (word != "SAFE") return false;
    ++safe;
  }
  if (safe == 0) return false;
  // A single one-word answer covers the whole document.
  if (trim(response).size() <= 6 && safe == 1) return true;
  return safe >= snippet_count;
}

InterpretResult parse_interpretation(std::string_view response) {
  static const std::regex kFirst(R"(explanation\s+of\s+(the\s+)?updated\s+code)", std::regex::icase);
  static const std::regex kSecond(R"(explanation\s+of\s+(the\s+)?query\s+on\s+(the\s+)?results)",
                                  std::regex::icase);
  static const std::regex kOutOf(R"(\b(10|[1-9])\s*(/|out\s+of)\s*10\b)", std::regex::icase);
  static const std::regex kNear(
      R"(\b(around|about|approximately|roughly|rated|rating\s+of|score\s+of|impact\s+of)\s+(at\s+|as\s+)?(an?\s+)?(10|[1-9])\b)",
      std::regex::icase);

  const std::string text(response);
  InterpretResult out;
  std::smatch first, second;
  const bool has_first = std::regex_search(text, first, kFirst);
  const bool has_second = std::regex_search(text, second, kSecond);
  const auto clean = [](std::string_view part) {
    part = trim(part);
    // Drop header decoration such as "**", ":" and a leading "(2)".
    while (!part.empty() && (part.front() == '*' || part.front() == ':')) part = trim(part.substr(1));
    while (!part.empty() && (part.back() == '*' || part.back() == '#')) part = trim(part.substr(0, part.size() - 1));
    if (part.size() >= 3 && part.substr(part.size() - 3) == "(2)") part = trim(part.substr(0, part.size() - 3));
    while (!part.empty() && part.back() == '*') part = trim(part.substr(0, part.size() - 1));
    return std::string(part);
  };
  if (has_first && has_second && first.position(0) < second.position(0)) {
    const auto a = static_cast<std::size_t>(first.position(0) + first.length(0));
    const auto b = static_cast<std::size_t>(second.position(0));
    const auto c = static_cast<std::size_t>(second.position(0) + second.length(0));
    out.explanation_correctness = clean(std::string_view(text).substr(a, b - a));
    out.explanation_results = clean(std::string_view(text).substr(c));
    out.headers_found = true;
  } else {
    out.explanation_correctness = text;
    out.explanation_results = text;
  }
  std::smatch rating;
  if (std::regex_search(text, rating, kOutOf)) {
    out.impact_rating = std::stoi(rating[1].str());
  } else if (std::regex_search(text, rating, kNear)) {
    out.impact_rating = std::stoi(rating[4].str());
  }
  return out;
}

std::string describe(const Solution& solution) {
  std::ostringstream out;
  out << to_string(solution.status);
  if (solution.status == SolveStatus::kOptimal ||
      (solution.status == SolveStatus::kLimit && !solution.assignment.empty())) {
    out << " objective " << format_number(solution.objective);
    out << " (";
    for (std::size_t j = 0; j < solution.assignment.size(); ++j) {
      const auto& [name, value] = solution.assignment[j];
      out << (j ? ", " : "") << name << " = " << format_number(value);
    }
    out << ")";
  }
  return out.str();
}

std::string describe(const GedReport& report) {
  char nged[32];
  std::snprintf(nged, sizeof nged, "%.3f", report.nged);
  const auto& b = report.breakdown;
  std::ostringstream out;
  out << "GED=" << report.ged << " NGED=" << nged << " (graph sizes " << report.size_original
      << " -> " << report.size_updated << "); constraint vertices inserted "
      << b.constraint_insert << ", deleted " << b.constraint_delete << ", attributes changed "
      << b.constraint_substituted_attrs << "; variable vertices inserted " << b.variable_insert
      << ", deleted " << b.variable_delete << ", attributes changed " << b.variable_substituted_attrs
      << "; edges inserted " << b.edge_insert << ", deleted " << b.edge_delete
      << ", coefficients changed " << b.edge_substituted;
  return out.str();
}

std::string_view dsl_reference() {
  return R"(EOR model language, one statement per line; "#" starts a comment.
  param NAME = EXPR                      numeric parameter; a later definition overrides an earlier one
  minimize: EXPR   |   maximize: EXPR    linear objective over decision variables
  subject to:                            starts the constraint list
  NAME: EXPR <= EXPR                     also >=, ==, and ranged  LO <= EXPR <= HI
  bounds:                                then lines such as  X >= 0,  X <= 5,  0 <= X <= 5
  integers: X Y                          integer decision variables
Expressions use numbers, parameters, + - * / and parentheses; "500 A" means 500 * A.
Constraints must stay linear in the decision variables. Variables are declared by
the objective, bounds and integers lines and cannot be added by an edit.
Data lines (param) go between "# EOR DATA BEGIN" and "# EOR DATA END".
Editable constraints sit between "# EOR CONSTRAINT BEGIN" and "# EOR CONSTRAINT END".)";
}

namespace {

using Clock = std::chrono::steady_clock;

class Session {
 public:
  Session(const LinearModel& model, const std::string& query, const AgentConfig& config,
          ChatProvider& provider, const PhaseObserver& observer)
      : model_(model), config_(config), provider_(provider), observer_(observer), start_(Clock::now()) {
    out_.query = query;
    out_.original_source = model.source_text;
    out_.phase = Phase::kAwaitQuery;
    out_.phases.push_back(Phase::kAwaitQuery);
  }

  SessionOutcome run() {
    try {
      out_.original_solution = solve_milp(model_, config_.solver_budget);
      start_conversation();
      enter(Phase::kWriterPatch);
      while (out_.phase != Phase::kDone && out_.phase != Phase::kFailed) {
        switch (out_.phase) {
          case Phase::kWriterPatch: writer_patch(); break;
          case Phase::kSafeguardCheck: safeguard_check(); break;
          case Phase::kDebug: debug(); break;
          case Phase::kSolve: solve(); break;
          case Phase::kInterpret: interpret(); break;
          default: throw std::logic_error("session resumed in a terminal phase");
        }
      }
    } catch (const std::exception& e) {
      // Internal faults end the session instead of escaping it.
      out_.failure = SessionFailure{FailureKind::kSolveError, std::string("internal error: ") + e.what()};
      out_.phase = Phase::kFailed;
      out_.phases.push_back(Phase::kFailed);
    }
    return std::move(out_);
  }

 private:
  void enter(Phase next) {
    if (!transition_allowed(out_.phase, next)) {
      throw std::logic_error(std::string("illegal transition ") + std::string(to_string(out_.phase)) +
                             " -> " + std::string(to_string(next)));
    }
    out_.phase = next;
    out_.phases.push_back(next);
    if (observer_) observer_(next);
  }

  void fail(FailureKind kind, std::string detail) {
    out_.failure = SessionFailure{kind, std::move(detail)};
    enter(Phase::kFailed);
  }

  // Records the error for the Debug phase, which retries or gives up.
  void to_debug(FailureKind kind, std::string type, std::string detail) {
    last_error_ = {kind, detail};
    error_type_ = std::move(type);
    enter(Phase::kDebug);
  }

  std::optional<std::string> call(const std::string& role, const std::string& step,
                                  const std::vector<ChatMessage>& messages) {
    if (Clock::now() - start_ > config_.session_timeout) {
      fail(FailureKind::kTimeout, "session exceeded its time limit");
      return std::nullopt;
    }
    ProviderRequest request;
    request.messages = messages;
    request.temperature = config_.temperature;
    request.max_tokens = config_.max_tokens;
    request.session = config_.session_key;
    request.step = step;
    std::string prompt;
    for (const auto& m : messages) prompt += "[" + m.role + "]\n" + m.content + "\n";
    try {
      ProviderResponse response = provider_.complete(request);
      out_.transcript.push_back({role, prompt, response.text});
      return std::move(response.text);
    } catch (const ProviderError& e) {
      out_.transcript.push_back({role, prompt, std::string("<provider error> ") + e.what()});
      fail(FailureKind::kProvider, e.what());
      return std::nullopt;
    }
  }

  void start_conversation() {
    const std::string example =
        config_.shot_mode == ShotMode::kOne && !config_.example_qa.empty() ? config_.example_qa : "None";
    writer_system_ = render(TemplateId::kWriterSystem,
                            {{"description", model_.description},
                             {"source_code", model_.source_text},
                             {"doc_str", std::string(dsl_reference())},
                             {"example_qa", example},
                             {"execution_result", describe(out_.original_solution)}});
    conversation_ = {{"system", writer_system_},
                     {"user", render(TemplateId::kCode, {{"query", out_.query}})}};
  }

  void writer_patch() {
    const auto response = call("writer", "writer", conversation_);
    if (!response) return;
    conversation_.push_back({"assistant", *response});
    try {
      out_.patch = extract_patch(*response);
      enter(Phase::kSafeguardCheck);
    } catch (const PatchError& e) {
      out_.patch.reset();
      to_debug(FailureKind::kPatchFormat, std::string(to_string(e.violation().kind)), e.violation().detail);
    }
  }

  void safeguard_check() {
    const auto rejected = static_gate(*out_.patch);
    if (!rejected.empty()) {
      to_debug(FailureKind::kUnsafe, "unsafe-snippet",
                    "line outside the model language: '" + rejected.front() + "'");
      return;
    }
    nlohmann::ordered_json snippets = nlohmann::ordered_json::object();
    std::size_t n = 0;
    for (const auto* s : {&out_.patch->delete_constraint, &out_.patch->add_constraint, &out_.patch->add_data}) {
      if (*s) snippets["snippet_" + std::to_string(++n)] = **s;
    }
    const std::vector<ChatMessage> messages = {
        {"system", render(TemplateId::kSafeguardSystem, {{"source_code", snippets.dump(4)}})},
        {"user", render(TemplateId::kSafeguard, {})}};
    const auto response = call("safeguard", "safeguard", messages);
    if (!response) return;
    if (parse_safeguard_verdict(*response, n)) {
      enter(Phase::kSolve);
    } else {
      to_debug(FailureKind::kUnsafe, "unsafe-snippet",
                    "the safety review did not approve every snippet: " + std::string(trim(*response)));
    }
  }

  void debug() {
    if (out_.retry_count >= config_.debug_limit) {
      fail(last_error_.kind, last_error_.detail);
      return;
    }
    ++out_.retry_count;
    conversation_.push_back(
        {"user", render(TemplateId::kDebug, {{"error_type", error_type_}, {"error_message", last_error_.detail}})});
    enter(Phase::kWriterPatch);
  }

  void solve() {
    LinearModel updated;
    try {
      out_.updated_source = apply_patch(model_.source_text, *out_.patch);
      updated = parse_model(out_.updated_source);
    } catch (const PatchError& e) {
      const auto kind = e.violation().kind == ViolationKind::kSnippetParseError ? FailureKind::kParseError
                                                                                : FailureKind::kApplyError;
      to_debug(kind, std::string(to_string(e.violation().kind)), e.violation().detail);
      return;
    }
    if (const auto violations = validate_patch(model_, updated); !violations.empty()) {
      to_debug(FailureKind::kApplyError, std::string(to_string(violations.front().kind)),
                    violations.front().detail);
      return;
    }
    out_.updated_solution = solve_milp(updated, config_.solver_budget);
    if (out_.updated_solution.status == SolveStatus::kLimit) {
      fail(FailureKind::kSolveError, "solver budget exhausted on the updated model");
      return;
    }
    out_.ged_report = decision_information(model_, updated);
    enter(Phase::kInterpret);
  }

  void interpret() {
    const std::string prompt = render(TemplateId::kInterpreter,
                                      {{"source_code", model_.source_text},
                                       {"new_code", out_.updated_source},
                                       {"json_data", out_.patch->to_document()},
                                       {"original_execution_result", describe(out_.original_solution)},
                                       {"execution_rst", describe(out_.updated_solution)},
                                       {"different_model", describe(out_.ged_report)}});
    const auto response = call("interpreter", "interpreter", {{"system", writer_system_}, {"user", prompt}});
    if (!response) return;
    out_.interpretation = parse_interpretation(*response);
    enter(Phase::kDone);
  }

  const LinearModel& model_;
  const AgentConfig& config_;
  ChatProvider& provider_;
  const PhaseObserver& observer_;
  Clock::time_point start_;
  SessionOutcome out_;
  std::string writer_system_;
  std::vector<ChatMessage> conversation_;
  SessionFailure last_error_;
  std::string error_type_;
};

}  // namespace

SessionOutcome commander_run(const LinearModel& model, const std::string& query, const AgentConfig& config,
                             ChatProvider& provider, const PhaseObserver& observer) {
  return Session(model, query, config, provider, observer).run();
}

}  // namespace eor
