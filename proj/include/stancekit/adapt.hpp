#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/classifier.hpp"
#include "stancekit/core.hpp"
#include "stancekit/datagen.hpp"
#include "stancekit/llm_gateway.hpp"
#include "stancekit/metrics.hpp"

namespace stancekit {

enum class Grouping { PerTopic, PerInput };

std::string_view grouping_name(Grouping grouping);
Grouping grouping_from_name(std::string_view name);

struct AdaptConfig {
  std::size_t k = 3;
  LabelMode label_mode = LabelMode::Two;
  Grouping grouping = Grouping::PerTopic;
  HyperOverrides finetune;
  // Episode seeds are derive_seed(seed, "episode:" + key) unless
  // finetune.seed pins one.
  std::uint64_t seed = 0;
  // Episodes run concurrently only for backends that can clone().
  std::size_t workers = 1;
  // Processes episodes in a shuffled order. Results must not depend on it.
  std::optional<std::uint64_t> episode_order_seed;

  bool operator==(const AdaptConfig&) const = default;
};

struct EpisodeLog {
  std::string topic;
  std::size_t episode = 0;
  std::size_t generated_count = 0;
  std::size_t dropped_count = 0;
  bool partial = false;
  bool adapted = false;  // false: empty adaptation set, base model used
  int epochs_run = 0;
  double pre_train_loss = 0.0;
  double post_train_loss = 0.0;
  std::size_t examples_predicted = 0;

  bool operator==(const EpisodeLog&) const = default;
};

struct AdaptResult {
  PredictionSet predictions;
  std::vector<EpisodeLog> episodes;  // in episode order, not completion order
};

// Test-time adaptation: for each episode (a topic group, or one input), start
// from the base model's snapshot, generate a labeled adaptation set, fine-tune
// on it, predict the episode's examples, and discard the fine-tuned state.
// The base model's serialized state is unchanged afterwards.
AdaptResult run_dymoadapt(ClassifierBackend& base, const Dataset& test,
                          LlmGateway& gateway, const DatagenConfig& datagen,
                          const AdaptConfig& config);

// Read-only prediction pass with no adaptation.
PredictionSet run_baseline(const ClassifierBackend& model, const Dataset& test);

}  // namespace stancekit
