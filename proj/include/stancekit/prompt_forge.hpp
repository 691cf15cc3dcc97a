#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace stancekit {

enum class TemplateId { TopicGeneration, PostGeneration, StanceClassification };

std::string_view template_name(TemplateId id);
TemplateId template_from_name(std::string_view name);

struct PromptText {
  std::string text;

  bool operator==(const PromptText&) const = default;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

// Raw template body, byte-identical to prompts/<name>.txt.
std::string_view template_body(TemplateId id);

// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(TemplateId id);

// Substitutes every `{name}` placeholder with its binding. Bindings must
// cover exactly the template's placeholders, each with a non-empty value.
// Throws Error with MissingBinding / ExtraBinding / EmptyBinding.
PromptText render(TemplateId id, const Bindings& bindings);

}  // namespace stancekit
