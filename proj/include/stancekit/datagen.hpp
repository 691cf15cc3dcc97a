#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stancekit/core.hpp"
#include "stancekit/llm_gateway.hpp"

namespace stancekit {

enum class LabelMode { Two, Three };

std::string_view label_mode_name(LabelMode mode);
LabelMode label_mode_from_name(std::string_view name);
LabelSet label_set_for(LabelMode mode);

struct TopicProposal {
  std::string topic;
  StanceLabel label = StanceLabel::Pro;
  std::string source_post_id;
  std::size_t word_count = 0;
  // Outside the 2..4 word range. Kept unless strict_length is on.
  bool flagged_length = false;

  bool operator==(const TopicProposal&) const = default;
};

struct GenerationReport {
  std::size_t posts_processed = 0;
  std::size_t posts_failed = 0;
  std::size_t proposals_parsed = 0;
  std::size_t proposals_accepted = 0;
  std::size_t proposals_rejected_malformed = 0;
  std::size_t proposals_rejected_label = 0;
  std::size_t proposals_rejected_length = 0;
  std::size_t proposals_duplicate = 0;
  std::size_t proposals_flagged_length = 0;
  std::size_t llm_retries = 0;

  GenerationReport& operator+=(const GenerationReport& other);
  bool reconciles() const {
    return proposals_parsed == proposals_accepted + proposals_rejected_malformed +
                                   proposals_rejected_label +
                                   proposals_rejected_length + proposals_duplicate;
  }
};

struct DatagenConfig {
  std::string model_name = "gpt-3.5-turbo";
  double generation_temperature = 0.7;
  int topic_max_tokens = 512;
  int post_max_tokens = 512;
  // Fresh, cache-bypassing calls allowed after an unparseable topic reply.
  int parse_retries = 2;
  bool strict_length = false;
  std::size_t min_topic_words = 2;
  std::size_t max_topic_words = 4;
  // Appended to the post-generation prompt for generation index i > 0 so
  // each of the k requests has its own cache entry. `{index}` expands to i.
  std::string variant_suffix = "\n\n(variant {index})";
  std::size_t workers = 1;
};

// First balanced {...} block, honoring JSON string escapes. nullopt if none.
std::optional<std::string> extract_json_object(std::string_view text);

struct TopicParse {
  std::vector<TopicProposal> proposals;
  GenerationReport counts;
};

// Parses one topic-generation reply. Throws Error(MalformedResponse) when no
// JSON object can be extracted and parsed.
TopicParse parse_topic_response(std::string_view response,
                                std::string_view source_post_id,
                                const DatagenConfig& config);

TopicParse generate_topics_for_post(std::string_view post,
                                    std::string_view source_post_id,
                                    LlmGateway& gateway,
                                    const DatagenConfig& config);

struct MgtBuild {
  Dataset dataset{FormatTag::Mgt};
  GenerationReport report;
};

// One example per accepted proposal, id "<source_post_id>|<topic>". Posts
// whose replies stay malformed are counted in posts_failed and skipped.
MgtBuild build_mgt_dataset(const Dataset& posts, LlmGateway& gateway,
                           const DatagenConfig& config);

struct AdaptationSet {
  std::string topic;
  std::vector<StanceExample> examples;
  std::size_t k = 0;
  LabelMode mode = LabelMode::Two;
  std::size_t dropped = 0;

  std::size_t intended_size() const {
    return k * (mode == LabelMode::Two ? 2 : 3);
  }
  bool partial() const { return examples.size() < intended_size(); }
};

// Surface string bound to the post-generation {label} slot.
std::string_view generation_label_surface(StanceLabel label);

// k post-generation prompts per target label, in label order then
// generation index. Empty or failed generations are dropped and counted.
AdaptationSet generate_adaptation_set(std::string_view topic,
                                      const StanceExample& exemplar,
                                      std::size_t k, LabelMode mode,
                                      LlmGateway& gateway,
                                      const DatagenConfig& config);

}  // namespace stancekit
