// SPDX-License-Identifier: Apache-2.0

#include "eor/patch.hpp"

#include <algorithm>
#include <array>
#include <set>

#include <json.hpp>

namespace eor {

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kUnknownKey: return "unknown-key";
    case ViolationKind::kMalformedDocument: return "malformed-document";
    case ViolationKind::kSnippetParseError: return "snippet-parse-error";
    case ViolationKind::kNewVariableIntroduced: return "new-variable-introduced";
    case ViolationKind::kDeleteTargetMissing: return "delete-target-missing";
    case ViolationKind::kMarkerCorruption: return "marker-corruption";
  }
  return "unknown";
}

PatchError::PatchError(PatchViolation violation)
    : std::runtime_error(std::string(to_string(violation.kind)) + ": " + violation.detail),
      violation_(std::move(violation)) {}

std::vector<std::string> QueryPatch::keys() const {
  std::vector<std::string> out;
  if (delete_constraint) out.emplace_back(kDeleteConstraintKey);
  if (add_constraint) out.emplace_back(kAddConstraintKey);
  if (add_data) out.emplace_back(kAddDataKey);
  return out;
}

std::string QueryPatch::to_document() const {
  // ordered_json keeps protocol order in the output.
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  if (delete_constraint) doc[std::string(kDeleteConstraintKey)] = *delete_constraint;
  if (add_constraint) doc[std::string(kAddConstraintKey)] = *add_constraint;
  if (add_data) doc[std::string(kAddDataKey)] = *add_data;
  return doc.dump(4);
}

namespace {

[[noreturn]] void violate(ViolationKind kind, std::string detail) {
  throw PatchError(PatchViolation{kind, std::move(detail)});
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string normalize_ws(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (const char ch : trim(s)) {
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      pending_space = true;
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += ch;
  }
  return out;
}

std::vector<std::string> split(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (;;) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

// Snippet lines with one trailing newline tolerated.
std::vector<std::string> snippet_lines(std::string_view snippet) {
  while (!snippet.empty() && (snippet.back() == '\n' || snippet.back() == '\r')) {
    snippet.remove_suffix(1);
  }
  if (snippet.empty()) return {};
  return split(snippet);
}

const std::array<std::string_view, 4> kMarkers = {
    kDataBeginMarker, kDataEndMarker, kConstraintBeginMarker, kConstraintEndMarker};

bool mentions_marker(std::string_view line) {
  const auto t = trim(line);
  return std::find(kMarkers.begin(), kMarkers.end(), t) != kMarkers.end() ||
         t.find("EOR DATA") != std::string_view::npos ||
         t.find("EOR CONSTRAINT") != std::string_view::npos;
}

bool is_comment(std::string_view line) {
  const auto t = trim(line);
  return !t.empty() && t.front() == '#';
}

// Finds `needle` (normalized, non-empty lines) as a contiguous run among
// lines[begin, end), skipping blank lines and, when `skip_comments` is set,
// comment lines. Returns the indices of the matched lines.
std::optional<std::vector<std::size_t>> find_run(const std::vector<std::string>& lines,
                                                 std::size_t begin, std::size_t end,
                                                 const std::vector<std::string>& needle,
                                                 bool skip_comments) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = begin; i < end; ++i) {
    if (trim(lines[i]).empty()) continue;
    if (skip_comments && is_comment(lines[i])) continue;
    candidates.push_back(i);
  }
  if (needle.empty() || needle.size() > candidates.size()) return std::nullopt;
  for (std::size_t s = 0; s + needle.size() <= candidates.size(); ++s) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k) {
      ok = normalize_ws(lines[candidates[s + k]]) == needle[k];
    }
    if (ok) {
      return std::vector<std::size_t>(candidates.begin() + static_cast<std::ptrdiff_t>(s),
                                      candidates.begin() + static_cast<std::ptrdiff_t>(s + needle.size()));
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> effective_lines(std::string_view snippet) {
  std::vector<std::string> out;
  for (const auto& line : snippet_lines(snippet)) {
    if (trim(line).empty() || is_comment(line)) continue;
    out.push_back(normalize_ws(line));
  }
  return out;
}

QueryPatch parse_patch(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    violate(ViolationKind::kMalformedDocument, std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    violate(ViolationKind::kMalformedDocument, "patch must be a JSON object");
  }
  if (doc.empty()) {
    violate(ViolationKind::kMalformedDocument, "patch has no recognized keys");
  }
  QueryPatch patch;
  patch.raw = std::string(document);
  for (const auto& [key, value] : doc.items()) {
    std::optional<std::string>* slot = nullptr;
    if (key == kDeleteConstraintKey) {
      slot = &patch.delete_constraint;
    } else if (key == kAddConstraintKey) {
      slot = &patch.add_constraint;
    } else if (key == kAddDataKey) {
      slot = &patch.add_data;
    } else {
      violate(ViolationKind::kUnknownKey,
              "key '" + key + "' is not one of \"DELETE CONSTRAINT\", \"ADD CONSTRAINT\", "
              "\"ADD DATA\"");
    }
    if (!value.is_string()) {
      violate(ViolationKind::kMalformedDocument, "value of '" + key + "' must be a string");
    }
    *slot = value.get<std::string>();
  }
  return patch;
}

std::string apply_patch(std::string_view source, const QueryPatch& patch) {
  if (!patch.delete_constraint && !patch.add_constraint && !patch.add_data) {
    violate(ViolationKind::kMalformedDocument, "patch has no recognized keys");
  }
  for (const auto* snippet : {&patch.delete_constraint, &patch.add_constraint, &patch.add_data}) {
    if (!*snippet) continue;
    for (const auto& line : snippet_lines(**snippet)) {
      if (mentions_marker(line)) {
        violate(ViolationKind::kMarkerCorruption,
                "snippet line '" + std::string(trim(line)) + "' touches a marker");
      }
    }
  }

  std::vector<std::string> lines = split(source);
  std::array<std::optional<std::size_t>, 4> at{};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto t = trim(lines[i]);
    for (std::size_t m = 0; m < kMarkers.size(); ++m) {
      if (t != kMarkers[m]) continue;
      if (at[m]) {
        violate(ViolationKind::kMarkerCorruption,
                "marker '" + std::string(kMarkers[m]) + "' appears more than once");
      }
      at[m] = i;
    }
  }
  for (std::size_t m = 0; m < kMarkers.size(); ++m) {
    if (!at[m]) {
      violate(ViolationKind::kMarkerCorruption,
              "marker '" + std::string(kMarkers[m]) + "' is missing");
    }
  }
  if (!(*at[0] < *at[1] && *at[1] < *at[2] && *at[2] < *at[3])) {
    violate(ViolationKind::kMarkerCorruption, "markers are out of order");
  }

  // Deletion first so that a snippet can be replaced by delete + add.
  if (patch.delete_constraint) {
    std::vector<std::string> needle;
    for (const auto& line : snippet_lines(*patch.delete_constraint)) {
      if (!trim(line).empty()) needle.push_back(normalize_ws(line));
    }
    if (needle.empty()) {
      violate(ViolationKind::kDeleteTargetMissing, "delete snippet is empty");
    }
    auto hit = find_run(lines, *at[2] + 1, *at[3], needle, false);
    if (!hit) {
      std::vector<std::string> content;
      for (const auto& n : needle) {
        if (n.front() != '#') content.push_back(n);
      }
      hit = find_run(lines, *at[2] + 1, *at[3], content, true);
    }
    if (!hit) {
      violate(ViolationKind::kDeleteTargetMissing,
              "snippet not found inside the constraint region: '" + needle.front() + "'");
    }
    for (auto it = hit->rbegin(); it != hit->rend(); ++it) {
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(*it));
    }
    const std::size_t removed = hit->size();
    *at[3] -= removed;
  }

  if (patch.add_constraint) {
    const auto add = snippet_lines(*patch.add_constraint);
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(*at[3]), add.begin(), add.end());
  }
  if (patch.add_data) {
    const auto add = snippet_lines(*patch.add_data);
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(*at[1]), add.begin(), add.end());
  }

  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }

  try {
    (void)parse_model(out);
  } catch (const ModelError& e) {
    violate(ViolationKind::kSnippetParseError, e.what());
  }
  return out;
}

std::vector<PatchViolation> validate_patch(const LinearModel& original,
                                           const LinearModel& updated) {
  std::vector<PatchViolation> out;
  for (const auto& v : updated.variables) {
    const auto* before = original.find_variable(v.name);
    if (before == nullptr) {
      out.push_back({ViolationKind::kNewVariableIntroduced,
                     "decision variable '" + v.name + "' was added"});
    } else if (before->is_integer != v.is_integer) {
      out.push_back({ViolationKind::kNewVariableIntroduced,
                     "integrality of '" + v.name + "' changed"});
    }
  }
  for (const auto& v : original.variables) {
    if (updated.find_variable(v.name) == nullptr) {
      out.push_back({ViolationKind::kNewVariableIntroduced,
                     "decision variable '" + v.name + "' was removed"});
    }
  }
  return out;
}

}  // namespace eor
