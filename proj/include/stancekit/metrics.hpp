#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stancekit/core.hpp"

namespace stancekit {

struct PredictionRecord {
  std::string example_id;
  std::optional<StanceLabel> gold;
  StanceLabel predicted = StanceLabel::Pro;
  Probabilities probabilities{};

  bool operator==(const PredictionRecord&) const = default;
};

// One record per test example, in dataset order.
using PredictionSet = std::vector<PredictionRecord>;

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct ConfusionCounts {
  std::array<ClassCounts, kNumLabels> per_class{};
  std::size_t n = 0;
};

ConfusionCounts confusion(std::span<const StanceLabel> gold,
                          std::span<const StanceLabel> pred);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using PerClassScores = std::array<ClassScores, kNumLabels>;

// 0/0 is 0 for precision, recall and F1. Throws Error(LengthMismatch) when the
// sizes differ, Error(InvalidArgument) when both are empty.
PerClassScores f1_per_class(std::span<const StanceLabel> gold,
                            std::span<const StanceLabel> pred);

// Unweighted mean of per-class F1 over class_set.
double f1_macro(std::span<const StanceLabel> gold, std::span<const StanceLabel> pred,
                const LabelSet& class_set = LabelSet::pro_con());

using TopicScores = std::map<std::string, double>;

struct EvalReport {
  PerClassScores per_class{};
  double macro_f1_pro_con = 0.0;
  double macro_f1_all = 0.0;
  std::size_t n_scored = 0;
  std::size_t n_unscored = 0;  // examples without a gold label
  std::optional<TopicScores> per_topic;
};

// Scores the labeled examples of `test`. Throws Error(MissingPrediction)
// when an example id has no prediction.
EvalReport evaluate(const Dataset& test, const PredictionSet& predictions,
                    bool per_topic = false);

// Normalized topic -> macro F1 over Pro/Con. Topics with no Pro or Con gold
// label are left out.
TopicScores per_topic_report(const Dataset& test, const PredictionSet& predictions);

struct DatasetStats {
  std::size_t n_examples = 0;
  std::array<std::size_t, kNumLabels> n_per_label{};
  std::size_t n_unlabeled = 0;
  std::size_t n_unique_posts = 0;
  std::size_t n_unique_topics = 0;
  std::size_t n_topic_words = 0;
  std::size_t n_unique_topic_words = 0;
  double avg_words_per_topic = 0.0;  // n_topic_words / n_examples
};

DatasetStats dataset_stats(const Dataset& dataset);

// Sorted by frequency descending, then topic ascending.
std::vector<std::pair<std::string, std::size_t>> top_topics(const Dataset& dataset,
                                                             std::size_t n);

}  // namespace stancekit
