// SPDX-License-Identifier: Apache-2.0

// Optimization model representation for the what-if workbench.
//
// Models are written in a small line-oriented DSL (see README.md) that keeps
// two editable marker regions: one for data (parameter) insertions and one for
// constraint insertions/deletions. Parsing evaluates every parameter
// expression, so a LinearModel only carries numbers.

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eor {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline constexpr std::string_view kDataBeginMarker = "# EOR DATA BEGIN";
inline constexpr std::string_view kDataEndMarker = "# EOR DATA END";
inline constexpr std::string_view kConstraintBeginMarker = "# EOR CONSTRAINT BEGIN";
inline constexpr std::string_view kConstraintEndMarker = "# EOR CONSTRAINT END";

enum class Sense { kMinimize, kMaximize };

enum class Region { kFixed, kEditable };

struct VariableDef {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  double objective_coeff = 0.0;
  bool is_integer = false;
  std::size_t ordinal = 0;

  friend bool operator==(const VariableDef&, const VariableDef&) = default;
};

struct Term {
  std::string variable;
  double coeff = 0.0;

  friend bool operator==(const Term&, const Term&) = default;
};

struct ConstraintDef {
  std::string name;
  // Sorted by variable ordinal, no zero coefficients, one entry per variable.
  std::vector<Term> terms;
  double lower = -kInf;
  double upper = kInf;
  Region region = Region::kFixed;
  std::size_t ordinal = 0;

  friend bool operator==(const ConstraintDef&, const ConstraintDef&) = default;
};

struct ParamDef {
  std::string name;
  double value = 0.0;
  std::size_t ordinal = 0;

  friend bool operator==(const ParamDef&, const ParamDef&) = default;
};

struct LinearModel {
  Sense sense = Sense::kMinimize;
  std::string description;
  // Every definition in source order, shadowed ones included.
  std::vector<ParamDef> params;
  std::vector<VariableDef> variables;
  std::vector<ConstraintDef> constraints;
  std::string source_text;

  // Last definition of `name`, if any.
  [[nodiscard]] const ParamDef* effective_param(std::string_view name) const;
  [[nodiscard]] std::vector<ParamDef> effective_params() const;
  [[nodiscard]] const VariableDef* find_variable(std::string_view name) const;
  [[nodiscard]] const ConstraintDef* find_constraint(std::string_view name) const;
};

// Equality on everything the solver and graph layers can observe: sense,
// effective parameter values, variables, constraints. Source text,
// description and shadowed parameter definitions are ignored.
[[nodiscard]] bool semantically_equal(const LinearModel& a, const LinearModel& b);

struct SparseEntry {
  std::size_t col = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

using SparseRow = std::vector<SparseEntry>;

// min c'x  s.t.  l_s <= A x <= u_s,  l_x <= x <= u_x.
struct StandardFormLP {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> c;
  std::vector<SparseRow> rows;
  std::vector<double> l_s;
  std::vector<double> u_s;
  std::vector<double> l_x;
  std::vector<double> u_x;
  bool negated_objective = false;
  std::vector<std::string> var_names;
  std::vector<std::string> con_names;

  friend bool operator==(const StandardFormLP&, const StandardFormLP&) = default;
};

// Thrown by parse_model. `line` and `column` are 1-based; 0 means unknown.
class ModelError : public std::runtime_error {
 public:
  enum class Kind {
    kSyntax,
    kUndeclaredVariable,
    kNonlinearTerm,
    kMarker,
    kUnresolvedParameter,
    kInvalid,
  };

  ModelError(Kind kind, std::string message, std::size_t line = 0,
             std::size_t column = 0);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] std::size_t column() const noexcept { return column_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::size_t column_;
};

[[nodiscard]] std::string_view to_string(ModelError::Kind kind);

[[nodiscard]] LinearModel parse_model(std::string_view text);
[[nodiscard]] std::string render_model(const LinearModel& model);
[[nodiscard]] StandardFormLP to_standard_form(const LinearModel& model);

// Integrality flags in variable order; kept out of StandardFormLP on purpose.
[[nodiscard]] std::vector<bool> integrality(const LinearModel& model);

// Shortest decimal that round-trips; "inf"/"-inf" for infinities.
[[nodiscard]] std::string format_number(double value);

}  // namespace eor
