// SPDX-License-Identifier: Apache-2.0

// The three-key patch protocol. A patch is a JSON object whose values are DSL
// snippets under exactly the keys "DELETE CONSTRAINT", "ADD CONSTRAINT" and
// "ADD DATA". Application is region-scoped: data goes just before
// `# EOR DATA END`, constraints just before `# EOR CONSTRAINT END`, and
// deletions only ever touch lines inside the constraint region.

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eor/model.hpp"

namespace eor {

inline constexpr std::string_view kDeleteConstraintKey = "DELETE CONSTRAINT";
inline constexpr std::string_view kAddConstraintKey = "ADD CONSTRAINT";
inline constexpr std::string_view kAddDataKey = "ADD DATA";

struct QueryPatch {
  std::optional<std::string> delete_constraint;
  std::optional<std::string> add_constraint;
  std::optional<std::string> add_data;
  std::string raw;

  // Keys present, in protocol order.
  [[nodiscard]] std::vector<std::string> keys() const;
  // Canonical JSON document (keys in protocol order).
  [[nodiscard]] std::string to_document() const;
};

enum class ViolationKind {
  kUnknownKey,
  kMalformedDocument,
  kSnippetParseError,
  kNewVariableIntroduced,
  kDeleteTargetMissing,
  kMarkerCorruption,
};

[[nodiscard]] std::string_view to_string(ViolationKind kind);

struct PatchViolation {
  ViolationKind kind = ViolationKind::kMalformedDocument;
  std::string detail;

  friend bool operator==(const PatchViolation&, const PatchViolation&) = default;
};

class PatchError : public std::runtime_error {
 public:
  explicit PatchError(PatchViolation violation);

  [[nodiscard]] const PatchViolation& violation() const noexcept { return violation_; }

 private:
  PatchViolation violation_;
};

// Strict: top-level object, string values, known keys, at least one key.
[[nodiscard]] QueryPatch parse_patch(std::string_view document);

// Returns the patched source; the result is guaranteed to re-parse.
[[nodiscard]] std::string apply_patch(std::string_view source, const QueryPatch& patch);

// Decision variables must be unchanged (names and integrality).
[[nodiscard]] std::vector<PatchViolation> validate_patch(const LinearModel& original,
                                                         const LinearModel& updated);

// Lines of a snippet that carry content (not blank, not a comment).
[[nodiscard]] std::vector<std::string> effective_lines(std::string_view snippet);

}  // namespace eor
