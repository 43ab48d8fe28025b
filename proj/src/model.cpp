// SPDX-License-Identifier: Apache-2.0

#include "eor/model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace eor {

ModelError::ModelError(Kind kind, std::string message, std::size_t line,
                       std::size_t column)
    : std::runtime_error([&] {
        if (line == 0) return message;
        return "line " + std::to_string(line) + ", column " +
               std::to_string(column) + ": " + message;
      }()),
      kind_(kind),
      line_(line),
      column_(column) {}

std::string_view to_string(ModelError::Kind kind) {
  switch (kind) {
    case ModelError::Kind::kSyntax: return "syntax";
    case ModelError::Kind::kUndeclaredVariable: return "undeclared-variable";
    case ModelError::Kind::kNonlinearTerm: return "nonlinear-term";
    case ModelError::Kind::kMarker: return "marker";
    case ModelError::Kind::kUnresolvedParameter: return "unresolved-parameter";
    case ModelError::Kind::kInvalid: return "invalid";
  }
  return "unknown";
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  // Integral values print in full so that 200000 does not become 2e+05.
  const bool integral = std::abs(value) < 1e15 && value == std::trunc(value);
  auto [ptr, ec] = integral ? std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed)
                            : std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

const ParamDef* LinearModel::effective_param(std::string_view name) const {
  const ParamDef* found = nullptr;
  for (const auto& p : params) {
    if (p.name == name && (found == nullptr || p.ordinal > found->ordinal)) found = &p;
  }
  return found;
}

std::vector<ParamDef> LinearModel::effective_params() const {
  std::vector<ParamDef> out;
  for (const auto& p : params) {
    if (effective_param(p.name) == &p) out.push_back(p);
  }
  return out;
}

const VariableDef* LinearModel::find_variable(std::string_view name) const {
  for (const auto& v : variables) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const ConstraintDef* LinearModel::find_constraint(std::string_view name) const {
  for (const auto& c : constraints) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool semantically_equal(const LinearModel& a, const LinearModel& b) {
  if (a.sense != b.sense || a.variables != b.variables ||
      a.constraints != b.constraints) {
    return false;
  }
  std::map<std::string, double> pa;
  std::map<std::string, double> pb;
  for (const auto& p : a.effective_params()) pa[p.name] = p.value;
  for (const auto& p : b.effective_params()) pb[p.name] = p.value;
  return pa == pb;
}

namespace {

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

enum class Tok {
  kIdent,
  kNumber,
  kPlus,
  kMinus,
  kStar,
  kSlash,
  kLParen,
  kRParen,
  kLe,
  kGe,
  kEq,
  kAssign,
  kColon,
  kEnd,
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double number = 0.0;
  std::size_t column = 0;  // 1-based within the line
};

std::vector<Token> tokenize(std::string_view text, std::size_t line,
                            std::size_t column_offset) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) {
    throw ModelError(ModelError::Kind::kSyntax, msg, line, column_offset + i + 1);
  };
  while (i < text.size()) {
    const char ch = text[i];
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      ++i;
      continue;
    }
    if (ch == '#') break;  // trailing comment
    Token tok;
    tok.column = column_offset + i + 1;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) {
        ++j;
      }
      tok.text = std::string(text.substr(i, j - i));
      if (tok.text == "inf" || tok.text == "infinity") {
        tok.kind = Tok::kNumber;
        tok.number = kInf;
      } else {
        tok.kind = Tok::kIdent;
      }
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) {
        ++j;
      }
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
          j = k;
        }
      }
      tok.text = std::string(text.substr(i, j - i));
      auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(),
                                       tok.number);
      if (ec != std::errc() || ptr != tok.text.data() + tok.text.size()) {
        fail("malformed number '" + tok.text + "'");
      }
      tok.kind = Tok::kNumber;
      i = j;
    } else {
      auto two = text.substr(i, 2);
      if (two == "<=") {
        tok.kind = Tok::kLe;
        i += 2;
      } else if (two == ">=") {
        tok.kind = Tok::kGe;
        i += 2;
      } else if (two == "==") {
        tok.kind = Tok::kEq;
        i += 2;
      } else {
        switch (ch) {
          case '+': tok.kind = Tok::kPlus; break;
          case '-': tok.kind = Tok::kMinus; break;
          case '*': tok.kind = Tok::kStar; break;
          case '/': tok.kind = Tok::kSlash; break;
          case '(': tok.kind = Tok::kLParen; break;
          case ')': tok.kind = Tok::kRParen; break;
          case '=': tok.kind = Tok::kAssign; break;
          case ':': tok.kind = Tok::kColon; break;
          default: fail(std::string("unexpected character '") + ch + "'");
        }
        ++i;
      }
      tok.text = std::string(text.substr(tok.column - column_offset - 1, 1));
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = Tok::kEnd;
  end.column = column_offset + text.size() + 1;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

// Linear form: sum(coeff * var) + constant. Keyed by variable name.
struct LinForm {
  std::map<std::string, double> coeffs;
  double constant = 0.0;

  [[nodiscard]] bool is_constant() const { return coeffs.empty(); }
};

LinForm scaled(LinForm f, double k) {
  for (auto& [_, c] : f.coeffs) c *= k;
  f.constant *= k;
  return f;
}

LinForm added(LinForm a, const LinForm& b, double sign) {
  for (const auto& [name, c] : b.coeffs) a.coeffs[name] += sign * c;
  a.constant += sign * b.constant;
  return a;
}

// Resolves an identifier to a linear form (a variable) or a constant (a
// parameter). Throws ModelError when it cannot.
using Resolver = std::function<LinForm(const Token&)>;

class ExprParser {
 public:
  ExprParser(const std::vector<Token>& toks, std::size_t begin, std::size_t end,
             std::size_t line, Resolver resolve)
      : toks_(toks), pos_(begin), end_(end), line_(line), resolve_(std::move(resolve)) {}

  LinForm parse_all() {
    if (pos_ >= end_) fail("expected an expression", peek());
    LinForm f = parse_sum();
    if (pos_ != end_) fail("unexpected '" + peek().text + "'", peek());
    return f;
  }

 private:
  [[nodiscard]] const Token& peek() const { return toks_[std::min(pos_, end_)]; }
  [[nodiscard]] bool at(Tok k) const { return pos_ < end_ && toks_[pos_].kind == k; }

  [[noreturn]] void fail(const std::string& msg, const Token& at_tok) const {
    throw ModelError(ModelError::Kind::kSyntax, msg, line_, at_tok.column);
  }

  LinForm parse_sum() {
    LinForm acc = parse_product();
    while (at(Tok::kPlus) || at(Tok::kMinus)) {
      const double sign = toks_[pos_].kind == Tok::kPlus ? 1.0 : -1.0;
      ++pos_;
      acc = added(std::move(acc), parse_product(), sign);
    }
    return acc;
  }

  static bool starts_factor(Tok k) {
    return k == Tok::kIdent || k == Tok::kNumber || k == Tok::kLParen;
  }

  LinForm multiply(const LinForm& a, const LinForm& b, const Token& where) const {
    if (!a.is_constant() && !b.is_constant()) {
      throw ModelError(ModelError::Kind::kNonlinearTerm,
                       "product of two decision variables is not linear", line_,
                       where.column);
    }
    if (a.is_constant()) return scaled(b, a.constant);
    return scaled(a, b.constant);
  }

  LinForm parse_product() {
    LinForm acc = parse_unary();
    for (;;) {
      if (at(Tok::kStar)) {
        const Token& op = toks_[pos_++];
        acc = multiply(acc, parse_unary(), op);
      } else if (at(Tok::kSlash)) {
        const Token& op = toks_[pos_++];
        LinForm rhs = parse_unary();
        if (!rhs.is_constant()) {
          throw ModelError(ModelError::Kind::kNonlinearTerm,
                           "division by a decision variable is not linear", line_,
                           op.column);
        }
        if (rhs.constant == 0.0) fail("division by zero", op);
        acc = scaled(std::move(acc), 1.0 / rhs.constant);
      } else if (pos_ < end_ && starts_factor(toks_[pos_].kind)) {
        // Juxtaposition: `500 A` means `500 * A`.
        const Token& where = toks_[pos_];
        acc = multiply(acc, parse_unary(), where);
      } else {
        return acc;
      }
    }
  }

  LinForm parse_unary() {
    if (at(Tok::kMinus)) {
      ++pos_;
      return scaled(parse_unary(), -1.0);
    }
    if (at(Tok::kPlus)) {
      ++pos_;
      return parse_unary();
    }
    return parse_primary();
  }

  LinForm parse_primary() {
    if (pos_ >= end_) fail("expected a number, name or '('", peek());
    const Token& t = toks_[pos_];
    switch (t.kind) {
      case Tok::kNumber: {
        ++pos_;
        LinForm f;
        f.constant = t.number;
        return f;
      }
      case Tok::kIdent:
        ++pos_;
        return resolve_(t);
      case Tok::kLParen: {
        ++pos_;
        LinForm inner = parse_sum();
        if (!at(Tok::kRParen)) fail("expected ')'", peek());
        ++pos_;
        return inner;
      }
      default:
        fail("unexpected '" + t.text + "'", t);
    }
  }

  const std::vector<Token>& toks_;
  std::size_t pos_;
  std::size_t end_;
  std::size_t line_;
  Resolver resolve_;
};

// ---------------------------------------------------------------------------
// Statement collection
// ---------------------------------------------------------------------------

struct RawLine {
  std::size_t line = 0;
  std::vector<Token> toks;
  std::size_t body = 0;  // index of the first token after the statement head
};

struct RawParam {
  std::string name;
  RawLine src;
};

struct RawConstraint {
  std::string name;
  RawLine src;
  Region region = Region::kFixed;
};

struct RawModel {
  std::optional<Sense> sense;
  std::optional<RawLine> objective;
  std::vector<RawParam> params;
  std::vector<RawConstraint> constraints;
  std::vector<RawLine> bounds;
  std::vector<std::pair<std::size_t, Token>> integers;
  std::vector<std::string> description;
  // Declaration events in textual order: objective, bounds and integer lines.
  enum class DeclKind { kObjective, kBound, kIntegers };
  std::vector<std::pair<DeclKind, std::size_t>> decl_order;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

bool is_keyword(std::string_view word) {
  static const std::unordered_set<std::string_view> kKeywords = {
      "param", "minimize", "maximize", "subject", "to", "bounds", "integers"};
  return kKeywords.contains(word);
}

enum class Section { kPreamble, kConstraints, kBounds, kIntegers };

RawModel collect(std::string_view text) {
  RawModel raw;
  const auto lines = split_lines(text);

  // marker index -> line number of occurrence
  std::array<std::size_t, 4> marker_line{0, 0, 0, 0};
  const std::array<std::string_view, 4> markers = {
      kDataBeginMarker, kDataEndMarker, kConstraintBeginMarker, kConstraintEndMarker};

  bool in_description = true;
  bool in_data = false;
  bool in_constraint_region = false;
  Section section = Section::kPreamble;

  for (std::size_t idx = 0; idx < lines.size(); ++idx) {
    const std::size_t lineno = idx + 1;
    const std::string_view full = lines[idx];
    const std::string_view line = trim(full);
    const std::size_t col0 = static_cast<std::size_t>(line.data() - full.data());

    if (line.empty()) {
      in_description = false;
      continue;
    }

    if (line.front() == '#') {
      const auto it = std::find(markers.begin(), markers.end(), line);
      if (it != markers.end()) {
        in_description = false;
        const auto m = static_cast<std::size_t>(it - markers.begin());
        if (marker_line[m] != 0) {
          throw ModelError(ModelError::Kind::kMarker,
                           "duplicate marker '" + std::string(line) + "'", lineno, col0 + 1);
        }
        for (std::size_t later = m + 1; later < markers.size(); ++later) {
          if (marker_line[later] != 0) {
            throw ModelError(ModelError::Kind::kMarker,
                             "marker '" + std::string(line) + "' out of order", lineno,
                             col0 + 1);
          }
        }
        if (m > 0 && marker_line[m - 1] == 0) {
          throw ModelError(ModelError::Kind::kMarker,
                           "marker '" + std::string(line) + "' appears before '" +
                               std::string(markers[m - 1]) + "'",
                           lineno, col0 + 1);
        }
        marker_line[m] = lineno;
        in_data = (m == 0);
        in_constraint_region = (m == 2);
        continue;
      }
      if (line.find("EOR DATA") != std::string_view::npos ||
          line.find("EOR CONSTRAINT") != std::string_view::npos) {
        throw ModelError(ModelError::Kind::kMarker,
                         "malformed marker line '" + std::string(line) + "'", lineno,
                         col0 + 1);
      }
      if (in_description) {
        auto body = line.substr(1);
        if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
        raw.description.emplace_back(body);
      }
      continue;
    }
    in_description = false;

    RawLine rl;
    rl.line = lineno;
    rl.toks = tokenize(line, lineno, col0);
    const Token& head = rl.toks.front();

    auto expect_colon_after = [&](std::size_t i) {
      if (rl.toks[i].kind != Tok::kColon) {
        throw ModelError(ModelError::Kind::kSyntax, "expected ':'", lineno,
                         rl.toks[i].column);
      }
    };

    if (in_data) {
      if (head.kind != Tok::kIdent || head.text != "param") {
        throw ModelError(ModelError::Kind::kSyntax,
                         "only 'param' lines are allowed inside the data region", lineno,
                         head.column);
      }
    }

    if (head.kind == Tok::kIdent && head.text == "param") {
      if (rl.toks[1].kind != Tok::kIdent || is_keyword(rl.toks[1].text)) {
        throw ModelError(ModelError::Kind::kSyntax, "expected parameter name", lineno,
                         rl.toks[1].column);
      }
      if (rl.toks[2].kind != Tok::kAssign) {
        throw ModelError(ModelError::Kind::kSyntax, "expected '='", lineno,
                         rl.toks[2].column);
      }
      rl.body = 3;
      raw.params.push_back(RawParam{rl.toks[1].text, std::move(rl)});
      continue;
    }

    if (in_constraint_region) {
      if (head.kind != Tok::kIdent || rl.toks[1].kind != Tok::kColon ||
          is_keyword(head.text)) {
        throw ModelError(ModelError::Kind::kSyntax,
                         "only 'NAME: ...' constraint lines are allowed inside the "
                         "constraint region",
                         lineno, head.column);
      }
      rl.body = 2;
      raw.constraints.push_back(RawConstraint{head.text, std::move(rl), Region::kEditable});
      continue;
    }

    if (head.kind == Tok::kIdent && (head.text == "minimize" || head.text == "maximize")) {
      if (raw.sense) {
        throw ModelError(ModelError::Kind::kSyntax, "objective declared twice", lineno,
                         head.column);
      }
      expect_colon_after(1);
      raw.sense = head.text == "minimize" ? Sense::kMinimize : Sense::kMaximize;
      rl.body = 2;
      raw.objective = std::move(rl);
      raw.decl_order.emplace_back(RawModel::DeclKind::kObjective, 0);
      section = Section::kPreamble;
      continue;
    }
    if (head.kind == Tok::kIdent && head.text == "subject") {
      if (rl.toks[1].kind != Tok::kIdent || rl.toks[1].text != "to") {
        throw ModelError(ModelError::Kind::kSyntax, "expected 'subject to:'", lineno,
                         rl.toks[1].column);
      }
      if (rl.toks[2].kind == Tok::kColon) {
        if (rl.toks[3].kind != Tok::kEnd) {
          throw ModelError(ModelError::Kind::kSyntax, "unexpected text after 'subject to:'",
                           lineno, rl.toks[3].column);
        }
      } else if (rl.toks[2].kind != Tok::kEnd) {
        throw ModelError(ModelError::Kind::kSyntax, "expected ':'", lineno,
                         rl.toks[2].column);
      }
      section = Section::kConstraints;
      continue;
    }
    if (head.kind == Tok::kIdent && head.text == "bounds") {
      expect_colon_after(1);
      section = Section::kBounds;
      if (rl.toks[2].kind != Tok::kEnd) {
        rl.body = 2;
        raw.decl_order.emplace_back(RawModel::DeclKind::kBound, raw.bounds.size());
        raw.bounds.push_back(std::move(rl));
      }
      continue;
    }
    if (head.kind == Tok::kIdent && head.text == "integers") {
      expect_colon_after(1);
      section = Section::kIntegers;
      for (std::size_t i = 2; rl.toks[i].kind != Tok::kEnd; ++i) {
        if (rl.toks[i].kind != Tok::kIdent) {
          throw ModelError(ModelError::Kind::kSyntax, "expected variable name", lineno,
                           rl.toks[i].column);
        }
        raw.decl_order.emplace_back(RawModel::DeclKind::kIntegers, raw.integers.size());
        raw.integers.emplace_back(lineno, rl.toks[i]);
      }
      continue;
    }

    switch (section) {
      case Section::kConstraints:
        if (head.kind != Tok::kIdent || rl.toks[1].kind != Tok::kColon ||
            is_keyword(head.text)) {
          throw ModelError(ModelError::Kind::kSyntax, "expected 'NAME: <constraint>'",
                           lineno, head.column);
        }
        rl.body = 2;
        raw.constraints.push_back(RawConstraint{head.text, std::move(rl), Region::kFixed});
        break;
      case Section::kBounds:
        rl.body = 0;
        raw.decl_order.emplace_back(RawModel::DeclKind::kBound, raw.bounds.size());
        raw.bounds.push_back(std::move(rl));
        break;
      case Section::kIntegers:
        for (std::size_t i = 0; rl.toks[i].kind != Tok::kEnd; ++i) {
          if (rl.toks[i].kind != Tok::kIdent) {
            throw ModelError(ModelError::Kind::kSyntax, "expected variable name", lineno,
                             rl.toks[i].column);
          }
          raw.decl_order.emplace_back(RawModel::DeclKind::kIntegers, raw.integers.size());
          raw.integers.emplace_back(lineno, rl.toks[i]);
        }
        break;
      case Section::kPreamble:
        throw ModelError(ModelError::Kind::kSyntax,
                         "unexpected statement '" + head.text + "'", lineno, head.column);
    }
  }

  for (std::size_t m = 0; m < markers.size(); ++m) {
    if (marker_line[m] == 0) {
      throw ModelError(ModelError::Kind::kMarker,
                       "missing marker line '" + std::string(markers[m]) + "'");
    }
  }

  while (!raw.description.empty() && raw.description.back().empty()) {
    raw.description.pop_back();
  }
  return raw;
}

// Index of the next top-level comparison token at or after `from`.
std::size_t find_comparison(const std::vector<Token>& toks, std::size_t from) {
  for (std::size_t i = from; i < toks.size(); ++i) {
    const Tok k = toks[i].kind;
    if (k == Tok::kLe || k == Tok::kGe || k == Tok::kEq || k == Tok::kEnd) return i;
  }
  return toks.size() - 1;
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

class Builder {
 public:
  explicit Builder(RawModel raw) : raw_(std::move(raw)) {
    for (std::size_t i = 0; i < raw_.params.size(); ++i) {
      defs_by_name_[raw_.params[i].name].push_back(i);
    }
  }

  LinearModel build() {
    LinearModel model;
    model.sense = raw_.sense.value_or(Sense::kMinimize);

    std::string desc;
    for (std::size_t i = 0; i < raw_.description.size(); ++i) {
      if (i) desc += '\n';
      desc += raw_.description[i];
    }
    model.description = std::move(desc);

    param_values_.assign(raw_.params.size(), std::nullopt);
    for (std::size_t i = 0; i < raw_.params.size(); ++i) {
      model.params.push_back(ParamDef{raw_.params[i].name, eval_param(i), i});
    }

    declare_variables();
    model.variables = variables_;
    for (auto& [name, c] : objective_.coeffs) {
      if (c != 0.0) model.variables[var_index_.at(name)].objective_coeff = c;
    }

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < raw_.constraints.size(); ++i) {
      const auto& rc = raw_.constraints[i];
      if (!seen.insert(rc.name).second) {
        throw ModelError(ModelError::Kind::kInvalid,
                         "duplicate constraint name '" + rc.name + "'", rc.src.line,
                         rc.src.toks.front().column);
      }
      if (var_index_.contains(rc.name) || defs_by_name_.contains(rc.name)) {
        throw ModelError(ModelError::Kind::kInvalid,
                         "constraint name '" + rc.name + "' clashes with a variable or "
                         "parameter",
                         rc.src.line, rc.src.toks.front().column);
      }
      model.constraints.push_back(build_constraint(rc, i));
    }
    return model;
  }

 private:
  [[noreturn]] static void unresolved(const Token& t, std::size_t line,
                                      const std::string& why) {
    throw ModelError(ModelError::Kind::kUnresolvedParameter,
                     "cannot resolve '" + t.text + "': " + why, line, t.column);
  }

  double eval_param(std::size_t def) {
    if (param_values_[def]) return *param_values_[def];
    if (evaluating_.contains(def)) {
      const auto& rp = raw_.params[def];
      unresolved(rp.src.toks[1], rp.src.line, "circular parameter definition");
    }
    evaluating_.insert(def);
    const auto& rp = raw_.params[def];
    Resolver resolve = [&](const Token& t) -> LinForm {
      const auto it = defs_by_name_.find(t.text);
      if (it == defs_by_name_.end()) unresolved(t, rp.src.line, "no such parameter");
      std::size_t target = it->second.back();
      if (t.text == rp.name) {
        // Self reference refers to the previous definition of the same name.
        std::optional<std::size_t> prev;
        for (std::size_t d : it->second) {
          if (d < def) prev = d;
        }
        if (!prev) unresolved(t, rp.src.line, "no earlier definition");
        target = *prev;
      }
      LinForm f;
      f.constant = eval_param(target);
      return f;
    };
    const LinForm f =
        ExprParser(rp.src.toks, rp.src.body, rp.src.toks.size() - 1, rp.src.line, resolve)
            .parse_all();
    evaluating_.erase(def);
    param_values_[def] = f.constant;
    return f.constant;
  }

  LinForm param_constant(const Token& t, std::size_t line) {
    const auto it = defs_by_name_.find(t.text);
    if (it == defs_by_name_.end()) unresolved(t, line, "no such parameter");
    LinForm f;
    f.constant = eval_param(it->second.back());
    return f;
  }

  void declare(const Token& t, std::size_t line) {
    if (is_keyword(t.text)) {
      throw ModelError(ModelError::Kind::kSyntax, "'" + t.text + "' is reserved", line,
                       t.column);
    }
    if (defs_by_name_.contains(t.text)) {
      throw ModelError(ModelError::Kind::kInvalid,
                       "'" + t.text + "' is both a parameter and a variable", line,
                       t.column);
    }
    if (var_index_.contains(t.text)) return;
    var_index_[t.text] = variables_.size();
    VariableDef v;
    v.name = t.text;
    v.ordinal = variables_.size();
    variables_.push_back(std::move(v));
  }

  // Constant-only expression over parameters.
  double eval_constant(const RawLine& rl, std::size_t begin, std::size_t end) {
    Resolver resolve = [&](const Token& t) -> LinForm {
      if (var_index_.contains(t.text)) {
        throw ModelError(ModelError::Kind::kSyntax,
                         "expected a constant, found variable '" + t.text + "'", rl.line,
                         t.column);
      }
      return param_constant(t, rl.line);
    };
    return ExprParser(rl.toks, begin, end, rl.line, resolve).parse_all().constant;
  }

  void declare_variables() {
    for (const auto& [kind, idx] : raw_.decl_order) {
      switch (kind) {
        case RawModel::DeclKind::kObjective: {
          const RawLine& rl = *raw_.objective;
          Resolver resolve = [&](const Token& t) -> LinForm {
            if (defs_by_name_.contains(t.text)) return param_constant(t, rl.line);
            declare(t, rl.line);
            LinForm f;
            f.coeffs[t.text] = 1.0;
            return f;
          };
          objective_ = ExprParser(rl.toks, rl.body, rl.toks.size() - 1, rl.line, resolve)
                           .parse_all();
          if (objective_.constant != 0.0) {
            throw ModelError(ModelError::Kind::kInvalid,
                             "constant terms are not supported in the objective", rl.line,
                             rl.toks[rl.body].column);
          }
          break;
        }
        case RawModel::DeclKind::kBound:
          apply_bound(raw_.bounds[idx]);
          break;
        case RawModel::DeclKind::kIntegers: {
          const auto& [line, tok] = raw_.integers[idx];
          declare(tok, line);
          variables_[var_index_.at(tok.text)].is_integer = true;
          break;
        }
      }
    }
  }

  void apply_bound(const RawLine& rl) {
    const auto& toks = rl.toks;
    const std::size_t op1 = find_comparison(toks, rl.body);
    if (toks[op1].kind == Tok::kEnd) {
      throw ModelError(ModelError::Kind::kSyntax, "expected a bound comparison", rl.line,
                       toks[rl.body].column);
    }
    const std::size_t op2 = find_comparison(toks, op1 + 1);
    const std::size_t end = toks.size() - 1;

    auto is_name = [&](std::size_t b, std::size_t e) {
      return e == b + 1 && toks[b].kind == Tok::kIdent && !defs_by_name_.contains(toks[b].text);
    };
    std::string bounded;
    auto set = [&](const Token& var, Tok op, double v) {
      declare(var, rl.line);
      bounded = var.text;
      auto& def = variables_[var_index_.at(var.text)];
      switch (op) {
        case Tok::kGe: def.lower = v; break;
        case Tok::kLe: def.upper = v; break;
        default:
          def.lower = v;
          def.upper = v;
      }
    };
    auto flip = [](Tok op) {
      if (op == Tok::kLe) return Tok::kGe;
      if (op == Tok::kGe) return Tok::kLe;
      return op;
    };

    if (toks[op2].kind == Tok::kEnd) {
      if (is_name(rl.body, op1)) {
        set(toks[rl.body], toks[op1].kind, eval_constant(rl, op1 + 1, end));
      } else if (is_name(op1 + 1, end)) {
        set(toks[op1 + 1], flip(toks[op1].kind), eval_constant(rl, rl.body, op1));
      } else {
        throw ModelError(ModelError::Kind::kSyntax, "bound must name a single variable",
                         rl.line, toks[rl.body].column);
      }
    } else {
      if (toks[op1].kind != toks[op2].kind || toks[op1].kind == Tok::kEq ||
          !is_name(op1 + 1, op2) || toks[find_comparison(toks, op2 + 1)].kind != Tok::kEnd) {
        throw ModelError(ModelError::Kind::kSyntax,
                         "expected 'v <= NAME <= v' or 'v >= NAME >= v'", rl.line,
                         toks[op1].column);
      }
      const double a = eval_constant(rl, rl.body, op1);
      const double b = eval_constant(rl, op2 + 1, end);
      set(toks[op1 + 1], flip(toks[op1].kind), a);
      set(toks[op1 + 1], toks[op2].kind, b);
    }
    const auto& def = variables_[var_index_.at(bounded)];
    if (def.lower > def.upper) {
      throw ModelError(ModelError::Kind::kInvalid,
                       "lower bound exceeds upper bound for '" + def.name + "'", rl.line,
                       toks[rl.body].column);
    }
    if (std::isinf(def.lower) && def.lower > 0) {
      throw ModelError(ModelError::Kind::kInvalid, "lower bound of '" + def.name + "' is +inf",
                       rl.line, toks[rl.body].column);
    }
    if (std::isinf(def.upper) && def.upper < 0) {
      throw ModelError(ModelError::Kind::kInvalid, "upper bound of '" + def.name + "' is -inf",
                       rl.line, toks[rl.body].column);
    }
  }

  LinForm linear(const RawLine& rl, std::size_t begin, std::size_t end) {
    Resolver resolve = [&](const Token& t) -> LinForm {
      if (const auto it = var_index_.find(t.text); it != var_index_.end()) {
        LinForm f;
        f.coeffs[t.text] = 1.0;
        return f;
      }
      if (defs_by_name_.contains(t.text)) return param_constant(t, rl.line);
      throw ModelError(ModelError::Kind::kUndeclaredVariable,
                       "undeclared variable '" + t.text + "'", rl.line, t.column);
    };
    return ExprParser(rl.toks, begin, end, rl.line, resolve).parse_all();
  }

  ConstraintDef build_constraint(const RawConstraint& rc, std::size_t ordinal) {
    const RawLine& rl = rc.src;
    const auto& toks = rl.toks;
    const std::size_t end = toks.size() - 1;
    const std::size_t op1 = find_comparison(toks, rl.body);
    if (toks[op1].kind == Tok::kEnd) {
      throw ModelError(ModelError::Kind::kSyntax, "constraint needs <=, >= or ==", rl.line,
                       toks[std::min(rl.body, end)].column);
    }
    const std::size_t op2 = find_comparison(toks, op1 + 1);

    ConstraintDef def;
    def.name = rc.name;
    def.region = rc.region;
    def.ordinal = ordinal;

    LinForm body;
    if (toks[op2].kind == Tok::kEnd) {
      body = added(linear(rl, rl.body, op1), linear(rl, op1 + 1, end), -1.0);
      const double rhs = -body.constant;
      switch (toks[op1].kind) {
        case Tok::kLe: def.upper = rhs; break;
        case Tok::kGe: def.lower = rhs; break;
        default:
          def.lower = rhs;
          def.upper = rhs;
      }
    } else {
      if (toks[op1].kind != toks[op2].kind || toks[op1].kind == Tok::kEq ||
          toks[find_comparison(toks, op2 + 1)].kind != Tok::kEnd) {
        throw ModelError(ModelError::Kind::kSyntax,
                         "expected 'a <= expr <= b' or 'a >= expr >= b'", rl.line,
                         toks[op2].column);
      }
      const LinForm left = linear(rl, rl.body, op1);
      const LinForm right = linear(rl, op2 + 1, end);
      if (!left.is_constant() || !right.is_constant()) {
        throw ModelError(ModelError::Kind::kSyntax,
                         "outer sides of a ranged constraint must be constants", rl.line,
                         toks[rl.body].column);
      }
      body = linear(rl, op1 + 1, op2);
      double lo = left.constant - body.constant;
      double hi = right.constant - body.constant;
      if (toks[op1].kind == Tok::kGe) std::swap(lo, hi);
      def.lower = lo;
      def.upper = hi;
    }

    for (const auto& [name, c] : body.coeffs) {
      if (c != 0.0) def.terms.push_back(Term{name, c});
    }
    std::sort(def.terms.begin(), def.terms.end(), [&](const Term& a, const Term& b) {
      return var_index_.at(a.variable) < var_index_.at(b.variable);
    });

    if (std::isnan(def.lower) || std::isnan(def.upper)) {
      throw ModelError(ModelError::Kind::kInvalid, "constraint '" + def.name + "' bound is NaN",
                       rl.line, toks.front().column);
    }
    if (def.lower > def.upper) {
      throw ModelError(ModelError::Kind::kInvalid,
                       "constraint '" + def.name + "' has lower bound above upper bound",
                       rl.line, toks.front().column);
    }
    if (std::isinf(def.lower) && std::isinf(def.upper)) {
      throw ModelError(ModelError::Kind::kInvalid,
                       "constraint '" + def.name + "' has no finite bound", rl.line,
                       toks.front().column);
    }
    return def;
  }

  RawModel raw_;
  std::unordered_map<std::string, std::vector<std::size_t>> defs_by_name_;
  std::vector<std::optional<double>> param_values_;
  std::set<std::size_t> evaluating_;
  std::vector<VariableDef> variables_;
  std::unordered_map<std::string, std::size_t> var_index_;
  LinForm objective_;
};

void render_linear(std::ostringstream& out, const std::vector<Term>& terms) {
  if (terms.empty()) {
    out << "0";
    return;
  }
  bool first = true;
  for (const auto& t : terms) {
    double c = t.coeff;
    if (first) {
      if (c < 0) {
        out << "-";
        c = -c;
      }
    } else {
      out << (c < 0 ? " - " : " + ");
      c = std::abs(c);
    }
    if (c != 1.0) out << format_number(c) << " ";
    out << t.variable;
    first = false;
  }
}

}  // namespace

LinearModel parse_model(std::string_view text) {
  LinearModel model = Builder(collect(text)).build();
  model.source_text = std::string(text);
  return model;
}

std::string render_model(const LinearModel& model) {
  std::ostringstream out;
  if (!model.description.empty()) {
    for (const auto line : split_lines(model.description)) {
      out << "#";
      if (!line.empty()) out << " " << line;
      out << "\n";
    }
    out << "\n";
  }

  for (const auto& p : model.effective_params()) {
    out << "param " << p.name << " = " << format_number(p.value) << "\n";
  }
  out << kDataBeginMarker << "\n" << kDataEndMarker << "\n\n";

  // Every variable appears in the objective (zero coefficients included) so
  // that declaration order survives the round trip.
  out << (model.sense == Sense::kMinimize ? "minimize: " : "maximize: ");
  if (model.variables.empty()) {
    out << "0";
  } else {
    std::vector<Term> obj;
    bool any_zero = false;
    for (const auto& v : model.variables) {
      obj.push_back(Term{v.name, v.objective_coeff});
      any_zero = any_zero || v.objective_coeff == 0.0;
    }
    if (!any_zero) {
      render_linear(out, obj);
    } else {
      for (std::size_t i = 0; i < obj.size(); ++i) {
        if (i) out << " + ";
        out << format_number(obj[i].coeff) << " " << obj[i].variable;
      }
    }
  }
  out << "\n\nsubject to:\n";

  auto render_constraint = [&](const ConstraintDef& c) {
    out << c.name << ": ";
    if (!std::isinf(c.lower) && !std::isinf(c.upper) && c.lower != c.upper) {
      out << format_number(c.lower) << " <= ";
      render_linear(out, c.terms);
      out << " <= " << format_number(c.upper);
    } else {
      render_linear(out, c.terms);
      if (c.lower == c.upper) {
        out << " == " << format_number(c.upper);
      } else if (std::isinf(c.upper)) {
        out << " >= " << format_number(c.lower);
      } else {
        out << " <= " << format_number(c.upper);
      }
    }
    out << "\n";
  };

  std::vector<const ConstraintDef*> ordered;
  for (const auto& c : model.constraints) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->ordinal < b->ordinal; });

  // Fixed constraints before the first editable one stay above the region.
  std::size_t i = 0;
  while (i < ordered.size() && ordered[i]->region == Region::kFixed) {
    render_constraint(*ordered[i]);
    ++i;
  }
  out << kConstraintBeginMarker << "\n";
  std::vector<const ConstraintDef*> after;
  for (; i < ordered.size(); ++i) {
    if (ordered[i]->region == Region::kEditable) {
      render_constraint(*ordered[i]);
    } else {
      after.push_back(ordered[i]);
    }
  }
  out << kConstraintEndMarker << "\n";
  for (const auto* c : after) render_constraint(*c);

  bool any_bounds = false;
  for (const auto& v : model.variables) {
    if (v.lower == 0.0 && std::isinf(v.upper)) continue;
    if (!any_bounds) out << "\nbounds:\n";
    any_bounds = true;
    if (v.lower == v.upper) {
      out << format_number(v.lower) << " <= " << v.name << " <= " << format_number(v.upper)
          << "\n";
    } else if (v.lower != 0.0 && !std::isinf(v.upper)) {
      out << format_number(v.lower) << " <= " << v.name << " <= " << format_number(v.upper)
          << "\n";
    } else if (v.lower != 0.0) {
      out << v.name << " >= " << format_number(v.lower) << "\n";
    } else {
      out << v.name << " <= " << format_number(v.upper) << "\n";
    }
  }

  std::vector<std::string> ints;
  for (const auto& v : model.variables) {
    if (v.is_integer) ints.push_back(v.name);
  }
  if (!ints.empty()) {
    out << "\nintegers:";
    for (const auto& n : ints) out << " " << n;
    out << "\n";
  }
  return out.str();
}

StandardFormLP to_standard_form(const LinearModel& model) {
  StandardFormLP lp;
  lp.n = model.variables.size();
  lp.m = model.constraints.size();
  lp.negated_objective = model.sense == Sense::kMaximize;

  std::unordered_map<std::string, std::size_t> col;
  for (const auto& v : model.variables) {
    col[v.name] = v.ordinal;
  }
  lp.c.assign(lp.n, 0.0);
  lp.l_x.assign(lp.n, 0.0);
  lp.u_x.assign(lp.n, kInf);
  lp.var_names.resize(lp.n);
  for (const auto& v : model.variables) {
    const double c = lp.negated_objective ? -v.objective_coeff : v.objective_coeff;
    lp.c[v.ordinal] = c == 0.0 ? 0.0 : c;
    lp.l_x[v.ordinal] = v.lower;
    lp.u_x[v.ordinal] = v.upper;
    lp.var_names[v.ordinal] = v.name;
  }

  std::vector<const ConstraintDef*> ordered;
  for (const auto& c : model.constraints) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->ordinal < b->ordinal; });

  for (const auto* con : ordered) {
    SparseRow row;
    for (const auto& t : con->terms) row.push_back(SparseEntry{col.at(t.variable), t.coeff});
    std::sort(row.begin(), row.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.col < b.col; });
    double lo = con->lower;
    double hi = con->upper;
    // Sign normalization: first nonzero coefficient (by ordinal) is positive.
    if (!row.empty() && row.front().value < 0) {
      for (auto& e : row) e.value = -e.value;
      lo = -con->upper;
      hi = -con->lower;
    }
    lp.rows.push_back(std::move(row));
    lp.l_s.push_back(lo == 0.0 ? 0.0 : lo);
    lp.u_s.push_back(hi == 0.0 ? 0.0 : hi);
    lp.con_names.push_back(con->name);
  }
  return lp;
}

std::vector<bool> integrality(const LinearModel& model) {
  std::vector<bool> flags(model.variables.size(), false);
  for (const auto& v : model.variables) flags[v.ordinal] = v.is_integer;
  return flags;
}

}  // namespace eor
