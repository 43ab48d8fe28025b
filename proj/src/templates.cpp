// SPDX-License-Identifier: Apache-2.0

#include "eor/templates.hpp"

#include <algorithm>
#include <cctype>

namespace eor {

namespace embedded {
extern const std::string_view kWriterSystem;
extern const std::string_view kCode;
extern const std::string_view kDebug;
extern const std::string_view kInterpreter;
extern const std::string_view kSafeguardSystem;
extern const std::string_view kSafeguard;
extern const std::string_view kJudge;
}  // namespace embedded

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::kWriterSystem: return "writer_system";
    case TemplateId::kCode: return "code";
    case TemplateId::kDebug: return "debug";
    case TemplateId::kInterpreter: return "interpreter";
    case TemplateId::kSafeguardSystem: return "safeguard_system";
    case TemplateId::kSafeguard: return "safeguard";
    case TemplateId::kJudge: return "judge";
  }
  return "unknown";
}

std::string_view template_text(TemplateId id) {
  switch (id) {
    case TemplateId::kWriterSystem: return embedded::kWriterSystem;
    case TemplateId::kCode: return embedded::kCode;
    case TemplateId::kDebug: return embedded::kDebug;
    case TemplateId::kInterpreter: return embedded::kInterpreter;
    case TemplateId::kSafeguardSystem: return embedded::kSafeguardSystem;
    case TemplateId::kSafeguard: return embedded::kSafeguard;
    case TemplateId::kJudge: return embedded::kJudge;
  }
  return {};
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the placeholder starting at text[i] ('{'), or 0.
std::size_t placeholder_at(std::string_view text, std::size_t i) {
  if (text[i] != '{' || i + 1 >= text.size() || !ident_start(text[i + 1])) return 0;
  std::size_t j = i + 2;
  while (j < text.size() && ident_char(text[j])) ++j;
  return j < text.size() && text[j] == '}' ? j - i + 1 : 0;
}

}  // namespace

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (const std::size_t len = placeholder_at(text, i)) {
      std::string name(text.substr(i + 1, len - 2));
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
      i += len - 1;
    }
  }
  return out;
}

std::string render(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (const std::size_t len = placeholder_at(text, i)) {
      const std::string name(text.substr(i + 1, len - 2));
      const auto it = values.find(name);
      if (it == values.end()) throw TemplateError("no value for placeholder {" + name + "}");
      out += it->second;
      i += len - 1;
    } else {
      out += text[i];
    }
  }
  return out;
}

std::string render(TemplateId id, const std::map<std::string, std::string>& values) {
  try {
    return render(template_text(id), values);
  } catch (const TemplateError& e) {
    throw TemplateError(std::string(template_name(id)) + " template: " + e.what());
  }
}

}  // namespace eor
