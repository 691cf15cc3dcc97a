#include "stancekit/core.hpp"

#include <algorithm>
#include <cctype>

#include "stancekit/error.hpp"

namespace stancekit {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string_view label_name(StanceLabel label) {
  switch (label) {
    case StanceLabel::Pro: return "pro";
    case StanceLabel::Con: return "con";
    case StanceLabel::Neutral: return "neutral";
  }
  return "?";
}

StanceLabel label_from_name(std::string_view name) {
  for (StanceLabel label : kAllLabels) {
    if (iequals(trim(name), label_name(label))) return label;
  }
  throw Error(ErrorCode::UnknownLabel,
              "unknown label name '" + std::string(name) + "'");
}

LabelSet::LabelSet(std::initializer_list<StanceLabel> labels) {
  for (StanceLabel label : labels) insert(label);
}

std::size_t LabelSet::size() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::vector<StanceLabel> LabelSet::labels() const {
  std::vector<StanceLabel> out;
  for (StanceLabel label : kAllLabels) {
    if (contains(label)) out.push_back(label);
  }
  return out;
}

LabelSet parse_label_set(std::string_view text) {
  LabelSet set;
  while (!text.empty()) {
    auto comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    if (!trim(item).empty()) set.insert(label_from_name(item));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (set.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty label set");
  }
  return set;
}

std::string to_string(const LabelSet& set) {
  std::string out;
  for (StanceLabel label : set.labels()) {
    if (!out.empty()) out += ',';
    out += label_name(label);
  }
  return out;
}

LabelScheme::LabelScheme(std::string name, std::vector<Entry> entries)
    : name_(std::move(name)), entries_(std::move(entries)) {}

const LabelScheme& LabelScheme::builtin(std::string_view name) {
  static const LabelScheme mgt(
      "mgt", {{"agree", StanceLabel::Pro}, {"disagree", StanceLabel::Con}});
  static const LabelScheme semeval("semeval",
                                   {{"FAVOR", StanceLabel::Pro},
                                    {"AGAINST", StanceLabel::Con},
                                    {"NONE", StanceLabel::Neutral}});
  static const LabelScheme vast_numeric("vast-numeric",
                                        {{"1", StanceLabel::Pro},
                                         {"0", StanceLabel::Con},
                                         {"2", StanceLabel::Neutral}});
  static const LabelScheme llm_answer("llm-answer",
                                      {{"agree", StanceLabel::Pro},
                                       {"disagree", StanceLabel::Con},
                                       {"neutral", StanceLabel::Neutral}});
  for (const LabelScheme* scheme : {&mgt, &semeval, &vast_numeric, &llm_answer}) {
    if (scheme->name() == name) return *scheme;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unregistered label scheme '" + std::string(name) + "'");
}

std::vector<std::string> LabelScheme::builtin_names() {
  return {"mgt", "semeval", "vast-numeric", "llm-answer"};
}

std::optional<StanceLabel> LabelScheme::lookup(std::string_view text) const {
  std::string_view key = trim(text);
  for (const Entry& entry : entries_) {
    if (iequals(key, entry.surface)) return entry.label;
  }
  return std::nullopt;
}

std::optional<std::string> LabelScheme::surface(StanceLabel label) const {
  for (const Entry& entry : entries_) {
    if (entry.label == label) return entry.surface;
  }
  return std::nullopt;
}

StanceLabel parse_label(std::string_view text, const LabelScheme& scheme) {
  if (auto label = scheme.lookup(text)) return *label;
  throw Error(ErrorCode::UnknownLabel, "label '" + std::string(text) +
                                           "' is not in scheme " +
                                           scheme.name());
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string normalize_topic(std::string_view topic) {
  std::string out;
  out.reserve(topic.size());
  bool pending_space = false;
  for (char c : trim(topic)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

void validate(const StanceExample& example) {
  if (trim(example.id).empty()) {
    throw Error(ErrorCode::InvalidArgument, "example id is empty");
  }
  if (trim(example.post).empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "example " + example.id + " has an empty post");
  }
  if (trim(example.topic).empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "example " + example.id + " has an empty topic");
  }
  if (example.source == ExampleSource::Generated && !example.label) {
    throw Error(ErrorCode::InvalidArgument,
                "generated example " + example.id + " has no label");
  }
}

std::string_view format_name(FormatTag tag) {
  switch (tag) {
    case FormatTag::Vast: return "vast";
    case FormatTag::Semeval: return "semeval";
    case FormatTag::Mgt: return "mgt";
  }
  return "?";
}

FormatTag format_from_name(std::string_view name) {
  for (FormatTag tag : {FormatTag::Vast, FormatTag::Semeval, FormatTag::Mgt}) {
    if (name == format_name(tag)) return tag;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown dataset format '" + std::string(name) + "'");
}

void Dataset::add(StanceExample example) {
  validate(example);
  if (!ids_.insert(example.id).second) {
    throw Error(ErrorCode::InvalidArgument,
                "duplicate example id " + example.id);
  }
  examples_.push_back(std::move(example));
}

TopicGroups group_by_topic(const Dataset& dataset) {
  TopicGroups groups;
  for (const StanceExample& example : dataset) {
    groups[normalize_topic(example.topic)].push_back(example);
  }
  return groups;
}

}  // namespace stancekit
