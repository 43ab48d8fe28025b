// SPDX-License-Identifier: Apache-2.0

// Prompt templates, embedded at build time from assets/templates. Placeholders
// are written `{name}` and are substituted in a single pass.

#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eor {

enum class TemplateId {
  kWriterSystem,
  kCode,
  kDebug,
  kInterpreter,
  kSafeguardSystem,
  kSafeguard,
  kJudge,
};

inline constexpr std::array<TemplateId, 7> kAllTemplates = {
    TemplateId::kWriterSystem, TemplateId::kCode,      TemplateId::kDebug, TemplateId::kInterpreter,
    TemplateId::kSafeguardSystem, TemplateId::kSafeguard, TemplateId::kJudge};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[nodiscard]] std::string_view template_name(TemplateId id);
[[nodiscard]] std::string_view template_text(TemplateId id);

// Distinct placeholder names in order of first appearance.
[[nodiscard]] std::vector<std::string> placeholders(std::string_view text);

// Throws TemplateError when a placeholder has no value.
[[nodiscard]] std::string render(std::string_view text, const std::map<std::string, std::string>& values);
[[nodiscard]] std::string render(TemplateId id, const std::map<std::string, std::string>& values);

}  // namespace eor
