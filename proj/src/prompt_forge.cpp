#include "stancekit/prompt_forge.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "stancekit/core.hpp"
#include "stancekit/error.hpp"

namespace stancekit {

namespace {

// Generated from prompts/*.txt at configure time.
#include "prompt_templates.inc"

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// If `text` starts with a `{identifier}` placeholder, returns the identifier.
std::optional<std::string_view> placeholder_at(std::string_view text) {
  if (text.size() < 3 || text[0] != '{' || !is_ident_start(text[1])) {
    return std::nullopt;
  }
  std::size_t end = 2;
  while (end < text.size() && is_ident_char(text[end])) ++end;
  if (end >= text.size() || text[end] != '}') return std::nullopt;
  return text.substr(1, end - 1);
}

template <typename Visit>
void scan(std::string_view body, Visit&& visit) {
  std::size_t literal_start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{') continue;
    if (auto name = placeholder_at(body.substr(i))) {
      visit(body.substr(literal_start, i - literal_start), *name);
      i += name->size() + 1;
      literal_start = i + 1;
    }
  }
  visit(body.substr(literal_start), std::string_view{});
}

}  // namespace

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::TopicGeneration: return "topic_generation";
    case TemplateId::PostGeneration: return "post_generation";
    case TemplateId::StanceClassification: return "stance_classification";
  }
  return "?";
}

TemplateId template_from_name(std::string_view name) {
  for (TemplateId id : {TemplateId::TopicGeneration, TemplateId::PostGeneration,
                        TemplateId::StanceClassification}) {
    if (name == template_name(id)) return id;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown template '" + std::string(name) + "'");
}

std::string_view template_body(TemplateId id) {
  switch (id) {
    case TemplateId::TopicGeneration: return kTopicGenerationTemplate;
    case TemplateId::PostGeneration: return kPostGenerationTemplate;
    case TemplateId::StanceClassification: return kStanceClassificationTemplate;
  }
  return {};
}

std::vector<std::string> placeholders(TemplateId id) {
  std::vector<std::string> names;
  scan(template_body(id), [&](std::string_view, std::string_view name) {
    if (name.empty()) return;
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      names.emplace_back(name);
    }
  });
  return names;
}

PromptText render(TemplateId id, const Bindings& bindings) {
  const std::vector<std::string> declared = placeholders(id);
  for (const std::string& name : declared) {
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw Error(ErrorCode::MissingBinding,
                  "template " + std::string(template_name(id)) +
                      " needs a binding for '" + name + "'");
    }
    if (trim(it->second).empty()) {
      throw Error(ErrorCode::EmptyBinding,
                  "binding '" + name + "' is empty");
    }
  }
  for (const auto& [name, value] : bindings) {
    if (std::find(declared.begin(), declared.end(), name) == declared.end()) {
      throw Error(ErrorCode::ExtraBinding,
                  "template " + std::string(template_name(id)) +
                      " has no placeholder '" + name + "'");
    }
  }

  PromptText out;
  scan(template_body(id), [&](std::string_view literal, std::string_view name) {
    out.text += literal;
    if (!name.empty()) out.text += bindings.find(name)->second;
  });
  return out;
}

}  // namespace stancekit
