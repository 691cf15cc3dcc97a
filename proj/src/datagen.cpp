#include "stancekit/datagen.hpp"

#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "stancekit/error.hpp"
#include "stancekit/parallel.hpp"
#include "stancekit/prompt_forge.hpp"

namespace stancekit {

using nlohmann::json;

std::string_view label_mode_name(LabelMode mode) {
  return mode == LabelMode::Two ? "two" : "three";
}

LabelMode label_mode_from_name(std::string_view name) {
  if (name == "two") return LabelMode::Two;
  if (name == "three") return LabelMode::Three;
  throw Error(ErrorCode::InvalidArgument,
              "label mode must be 'two' or 'three', got '" + std::string(name) + "'");
}

LabelSet label_set_for(LabelMode mode) {
  return mode == LabelMode::Two ? LabelSet::pro_con() : LabelSet::all();
}

GenerationReport& GenerationReport::operator+=(const GenerationReport& other) {
  posts_processed += other.posts_processed;
  posts_failed += other.posts_failed;
  proposals_parsed += other.proposals_parsed;
  proposals_accepted += other.proposals_accepted;
  proposals_rejected_malformed += other.proposals_rejected_malformed;
  proposals_rejected_label += other.proposals_rejected_label;
  proposals_rejected_length += other.proposals_rejected_length;
  proposals_duplicate += other.proposals_duplicate;
  proposals_flagged_length += other.proposals_flagged_length;
  llm_retries += other.llm_retries;
  return *this;
}

std::optional<std::string> extract_json_object(std::string_view text) {
  std::size_t start = text.find('{');
  while (start != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) return std::string(text.substr(start, i - start + 1));
      }
    }
    // Unbalanced from this brace; try the next one.
    start = text.find('{', start + 1);
  }
  return std::nullopt;
}

namespace {

// Collects the top-level members of a JSON object in document order,
// duplicates included, which nlohmann's DOM would collapse.
class TopLevelMembers : public nlohmann::json_sax<json> {
 public:
  struct Member {
    std::string key;
    std::optional<std::string> value;  // nullopt: not a string
  };

  std::vector<Member> members;
  bool top_is_object = false;

  bool null() override { return scalar(std::nullopt); }
  bool boolean(bool) override { return scalar(std::nullopt); }
  bool number_integer(number_integer_t) override { return scalar(std::nullopt); }
  bool number_unsigned(number_unsigned_t) override { return scalar(std::nullopt); }
  bool number_float(number_float_t, const string_t&) override {
    return scalar(std::nullopt);
  }
  bool string(string_t& val) override { return scalar(val); }
  bool binary(binary_t&) override { return scalar(std::nullopt); }

  bool start_object(std::size_t) override {
    if (depth_ == 0) top_is_object = true;
    if (depth_ == 1) scalar(std::nullopt);
    ++depth_;
    return true;
  }
  bool end_object() override {
    --depth_;
    return true;
  }
  bool start_array(std::size_t) override {
    if (depth_ == 1) scalar(std::nullopt);
    ++depth_;
    return true;
  }
  bool end_array() override {
    --depth_;
    return true;
  }
  bool key(string_t& val) override {
    if (depth_ == 1) pending_key_ = val;
    return true;
  }
  bool parse_error(std::size_t, const std::string&,
                   const nlohmann::detail::exception&) override {
    return false;
  }

 private:
  bool scalar(std::optional<std::string> value) {
    if (depth_ == 1) members.push_back({pending_key_, std::move(value)});
    return true;
  }

  int depth_ = 0;
  std::string pending_key_;
};

std::string expand_suffix(std::string_view pattern, std::size_t index) {
  std::string out(pattern);
  const std::string needle = "{index}";
  const std::string value = std::to_string(index);
  for (auto pos = out.find(needle); pos != std::string::npos;
       pos = out.find(needle, pos + value.size())) {
    out.replace(pos, needle.size(), value);
  }
  return out;
}

LlmRequest topic_request(std::string_view post, const DatagenConfig& config) {
  LlmRequest request;
  request.model_name = config.model_name;
  request.prompt = render(TemplateId::TopicGeneration, {{"post", std::string(post)}});
  request.temperature = config.generation_temperature;
  request.max_tokens = config.topic_max_tokens;
  return request;
}

// Returns nullopt once every retry has produced an unparseable reply.
std::optional<TopicParse> attempt_topics(std::string_view post,
                                         std::string_view source_post_id,
                                         LlmGateway& gateway,
                                         const DatagenConfig& config,
                                         std::size_t& retries) {
  const LlmRequest request = topic_request(post, config);
  for (int attempt = 0; attempt <= config.parse_retries; ++attempt) {
    if (attempt > 0) ++retries;
    LlmResponse response = gateway.complete(request, {.bypass_cache = attempt > 0});
    try {
      return parse_topic_response(response.text, source_post_id, config);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedResponse) throw;
    }
  }
  return std::nullopt;
}

}  // namespace

TopicParse parse_topic_response(std::string_view response,
                                std::string_view source_post_id,
                                const DatagenConfig& config) {
  std::optional<std::string> object = extract_json_object(response);
  if (!object) {
    throw Error(ErrorCode::MalformedResponse, "no JSON object in topic reply");
  }
  TopLevelMembers sax;
  if (!json::sax_parse(*object, &sax) || !sax.top_is_object) {
    throw Error(ErrorCode::MalformedResponse, "topic reply is not valid JSON");
  }

  const LabelScheme& scheme = LabelScheme::builtin("mgt");
  TopicParse out;
  GenerationReport& counts = out.counts;
  std::unordered_set<std::string> seen;
  for (const auto& member : sax.members) {
    ++counts.proposals_parsed;
    std::string topic = normalize_topic(member.key);
    if (topic.empty() || !member.value) {
      ++counts.proposals_rejected_malformed;
      continue;
    }
    std::optional<StanceLabel> label = scheme.lookup(*member.value);
    if (!label) {
      ++counts.proposals_rejected_label;
      continue;
    }
    if (!seen.insert(topic).second) {
      ++counts.proposals_duplicate;
      continue;
    }
    TopicProposal proposal;
    proposal.word_count = count_words(topic);
    proposal.flagged_length = proposal.word_count < config.min_topic_words ||
                              proposal.word_count > config.max_topic_words;
    if (proposal.flagged_length && config.strict_length) {
      ++counts.proposals_rejected_length;
      continue;
    }
    if (proposal.flagged_length) ++counts.proposals_flagged_length;
    proposal.topic = std::move(topic);
    proposal.label = *label;
    proposal.source_post_id = std::string(source_post_id);
    out.proposals.push_back(std::move(proposal));
    ++counts.proposals_accepted;
  }
  return out;
}

TopicParse generate_topics_for_post(std::string_view post,
                                    std::string_view source_post_id,
                                    LlmGateway& gateway,
                                    const DatagenConfig& config) {
  if (trim(post).empty()) {
    throw Error(ErrorCode::InvalidArgument, "post text is empty");
  }
  std::size_t retries = 0;
  auto parsed = attempt_topics(post, source_post_id, gateway, config, retries);
  if (!parsed) {
    throw Error(ErrorCode::MalformedResponse,
                "topic reply for post " + std::string(source_post_id) +
                    " still malformed after " + std::to_string(retries) +
                    " retries");
  }
  parsed->counts.llm_retries += retries;
  return std::move(*parsed);
}

MgtBuild build_mgt_dataset(const Dataset& posts, LlmGateway& gateway,
                           const DatagenConfig& config) {
  if (posts.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no posts to generate topics for");
  }
  // One request per distinct post; the first row carrying it names it.
  std::vector<const StanceExample*> unique;
  std::unordered_set<std::string> seen;
  for (const StanceExample& example : posts) {
    if (seen.insert(std::string(trim(example.post))).second) {
      unique.push_back(&example);
    }
  }

  struct Slot {
    std::optional<TopicParse> parsed;
    std::size_t retries = 0;
    bool backend_failed = false;
  };
  std::vector<Slot> slots(unique.size());
  parallel_for(unique.size(), config.workers, [&](std::size_t i) {
    Slot& slot = slots[i];
    try {
      slot.parsed = attempt_topics(unique[i]->post, unique[i]->id, gateway,
                                   config, slot.retries);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::Backend) throw;
      slot.backend_failed = true;
    }
  });

  MgtBuild out;
  std::size_t backend_failures = 0;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    Slot& slot = slots[i];
    out.report.posts_processed += 1;
    out.report.llm_retries += slot.retries;
    if (slot.backend_failed) ++backend_failures;
    if (!slot.parsed) {
      ++out.report.posts_failed;
      continue;
    }
    out.report += slot.parsed->counts;
    for (const TopicProposal& proposal : slot.parsed->proposals) {
      StanceExample example;
      example.id = proposal.source_post_id + "|" + proposal.topic;
      example.post = unique[i]->post;
      example.topic = proposal.topic;
      example.label = proposal.label;
      example.source = ExampleSource::Generated;
      out.dataset.add(std::move(example));
    }
  }
  if (backend_failures == unique.size()) {
    throw Error(ErrorCode::BackendExhausted,
                "LLM backend failed for every post; gateway unusable");
  }
  return out;
}

std::string_view generation_label_surface(StanceLabel label) {
  switch (label) {
    case StanceLabel::Pro: return "agree";
    case StanceLabel::Con: return "disagree";
    case StanceLabel::Neutral: return "neutral";
  }
  return "";
}

AdaptationSet generate_adaptation_set(std::string_view topic,
                                      const StanceExample& exemplar,
                                      std::size_t k, LabelMode mode,
                                      LlmGateway& gateway,
                                      const DatagenConfig& config) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const std::string normalized = normalize_topic(topic);
  if (normalize_topic(exemplar.topic) != normalized) {
    throw Error(ErrorCode::InvalidArgument,
                "exemplar topic '" + exemplar.topic + "' does not match '" +
                    normalized + "'");
  }

  struct Target {
    StanceLabel label;
    std::size_t index;
  };
  std::vector<Target> targets;
  for (StanceLabel label : label_set_for(mode).labels()) {
    for (std::size_t i = 0; i < k; ++i) targets.push_back({label, i});
  }

  std::vector<std::optional<std::string>> texts(targets.size());
  parallel_for(targets.size(), config.workers, [&](std::size_t slot) {
    const Target& target = targets[slot];
    LlmRequest request;
    request.model_name = config.model_name;
    request.prompt = render(
        TemplateId::PostGeneration,
        {{"topic", normalized},
         {"label", std::string(generation_label_surface(target.label))},
         {"post", exemplar.post}});
    if (target.index > 0) {
      request.prompt.text += expand_suffix(config.variant_suffix, target.index);
    }
    request.temperature = config.generation_temperature;
    request.max_tokens = config.post_max_tokens;
    request.seed_hint = static_cast<std::int64_t>(target.index);
    try {
      std::string text(trim(gateway.complete(request).text));
      if (!text.empty()) texts[slot] = std::move(text);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::Backend) throw;
    }
  });

  AdaptationSet set;
  set.topic = normalized;
  set.k = k;
  set.mode = mode;
  for (std::size_t slot = 0; slot < targets.size(); ++slot) {
    if (!texts[slot]) {
      ++set.dropped;
      continue;
    }
    StanceExample example;
    example.id = "gen|" + normalized + "|" +
                 std::string(label_name(targets[slot].label)) + "|" +
                 std::to_string(targets[slot].index);
    example.post = std::move(*texts[slot]);
    example.topic = normalized;
    example.label = targets[slot].label;
    example.source = ExampleSource::Generated;
    set.examples.push_back(std::move(example));
  }
  return set;
}

}  // namespace stancekit
