#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace stancekit {

// Canonical label space. The numeric values double as row indices in every
// classifier and as the tie-break order for argmax.
enum class StanceLabel { Pro = 0, Con = 1, Neutral = 2 };

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<StanceLabel, kNumLabels> kAllLabels = {
    StanceLabel::Pro, StanceLabel::Con, StanceLabel::Neutral};

using Probabilities = std::array<double, kNumLabels>;

constexpr std::size_t index_of(StanceLabel label) {
  return static_cast<std::size_t>(label);
}

// "pro" / "con" / "neutral".
std::string_view label_name(StanceLabel label);
StanceLabel label_from_name(std::string_view name);

// Small fixed-size set of labels, iterated in canonical order.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::initializer_list<StanceLabel> labels);

  static LabelSet pro_con() { return {StanceLabel::Pro, StanceLabel::Con}; }
  static LabelSet all() {
    return {StanceLabel::Pro, StanceLabel::Con, StanceLabel::Neutral};
  }

  void insert(StanceLabel label) { bits_[index_of(label)] = true; }
  bool contains(StanceLabel label) const { return bits_[index_of(label)]; }
  bool empty() const { return size() == 0; }
  std::size_t size() const;
  std::vector<StanceLabel> labels() const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::array<bool, kNumLabels> bits_{};
};

// Comma-separated label names, e.g. "pro,con".
LabelSet parse_label_set(std::string_view text);
std::string to_string(const LabelSet& set);

// Maps a dataset's surface vocabulary onto StanceLabel. Lookups trim
// surrounding whitespace and ignore ASCII case.
class LabelScheme {
 public:
  struct Entry {
    std::string surface;
    StanceLabel label;
  };

  LabelScheme(std::string name, std::vector<Entry> entries);

  // Registered schemes: mgt, semeval, vast-numeric, llm-answer.
  static const LabelScheme& builtin(std::string_view name);
  static std::vector<std::string> builtin_names();

  const std::string& name() const { return name_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::optional<StanceLabel> lookup(std::string_view text) const;

  // First surface string that maps to `label`; nullopt if the vocabulary
  // has none (e.g. Neutral under mgt).
  std::optional<std::string> surface(StanceLabel label) const;

 private:
  std::string name_;
  std::vector<Entry> entries_;
};

// Throws Error(UnknownLabel) when `text` is outside the scheme vocabulary.
StanceLabel parse_label(std::string_view text, const LabelScheme& scheme);

std::string_view trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

// Trim, then collapse internal whitespace runs to one space. Case is kept.
std::string normalize_topic(std::string_view topic);

// Number of whitespace-separated tokens.
std::size_t count_words(std::string_view text);

enum class ExampleSource { Real, Generated };

struct StanceExample {
  std::string id;
  std::string post;
  std::string topic;
  std::optional<StanceLabel> label;
  ExampleSource source = ExampleSource::Real;

  bool operator==(const StanceExample&) const = default;
};

// Throws Error(InvalidArgument) on an empty post/topic/id or an unlabeled
// generated example.
void validate(const StanceExample& example);

enum class FormatTag { Vast, Semeval, Mgt };

std::string_view format_name(FormatTag tag);
FormatTag format_from_name(std::string_view name);

class Dataset {
 public:
  explicit Dataset(FormatTag format = FormatTag::Mgt) : format_(format) {}

  FormatTag format() const { return format_; }
  void set_format(FormatTag format) { format_ = format; }

  // Validates the example and rejects duplicate ids.
  void add(StanceExample example);

  const std::vector<StanceExample>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const StanceExample& operator[](std::size_t i) const { return examples_[i]; }

  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

 private:
  FormatTag format_;
  std::vector<StanceExample> examples_;
  std::unordered_set<std::string> ids_;
};

using TopicGroups = std::map<std::string, std::vector<StanceExample>>;

// Keys are normalized topics in byte order; each group keeps dataset order.
TopicGroups group_by_topic(const Dataset& dataset);

}  // namespace stancekit
