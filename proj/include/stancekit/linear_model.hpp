#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stancekit/core.hpp"

namespace stancekit {

// Hashed feature space: 2^18 buckets.
inline constexpr std::uint32_t kFeatureBits = 18;
inline constexpr std::uint32_t kFeatureDim = 1u << kFeatureBits;

// Feature hash: 64-bit FNV-1a of the feature string with the offset basis
// XORed by kFeatureHashSeed, then reduced modulo kFeatureDim.
inline constexpr std::uint64_t kFeatureHashSeed = 0x5354414e43454b54ULL;  // "STANCEKT"

// Joins the post and topic token streams; it cannot collide with a real
// token because tokens are alphanumeric.
inline constexpr std::string_view kSeparatorToken = "[sep]";

struct FeatureEntry {
  std::uint32_t index;
  double value;

  bool operator==(const FeatureEntry&) const = default;
};

// Sorted by index, no duplicates.
using FeatureVector = std::vector<FeatureEntry>;

// Lowercases ASCII and splits on runs of non-alphanumeric bytes. Bytes >= 0x80
// count as alphanumeric so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

std::uint32_t feature_index(std::string_view feature);

// Unigram ("u:" + token) and bigram ("b:" + a + " " + b) counts over
// tokens(post) ++ [sep] ++ tokens(topic), before normalization.
FeatureVector feature_counts(std::string_view post, std::string_view topic);

// feature_counts scaled to unit L2 norm. Both arguments must be non-empty.
FeatureVector featurize(std::string_view post, std::string_view topic);

struct Hyperparameters {
  double learning_rate = 0.1;
  int epochs = 10;
  double l2 = 1e-4;
  int batch_size = 8;
  std::uint64_t seed = 0;

  bool operator==(const Hyperparameters&) const = default;
};

void validate(const Hyperparameters& hyper);

struct LabeledFeatures {
  FeatureVector features;
  StanceLabel label;
};

struct TrainReport {
  std::vector<double> epoch_losses;  // mean objective over each epoch's batches
  double initial_loss = 0.0;         // full-pass objective before training
  double final_loss = 0.0;           // full-pass objective after training
  int epochs_run = 0;
};

// Sparse data-term gradient of one example. The dense l2 * W term is left
// to the caller.
struct Gradient {
  std::array<std::vector<std::pair<std::uint32_t, double>>, kNumLabels> weights;
  Probabilities bias{};
};

// Multinomial logistic regression over the hashed feature space. Rows follow
// the canonical class order (Pro, Con, Neutral).
class LinearModel {
 public:
  explicit LinearModel(Hyperparameters hyper = {});

  const Hyperparameters& hyper() const { return hyper_; }
  void set_hyper(const Hyperparameters& hyper);

  double weight(StanceLabel label, std::uint32_t index) const {
    return weights_[index_of(label)][index];
  }
  void set_weight(StanceLabel label, std::uint32_t index, double value) {
    weights_[index_of(label)][index] = value;
  }
  double bias(StanceLabel label) const { return bias_[index_of(label)]; }
  void set_bias(StanceLabel label, double value) { bias_[index_of(label)] = value; }

  // Multiplies every parameter by c.
  void scale(double c);

  Probabilities logits(const FeatureVector& x) const;

  // Softmax over the full label space.
  Probabilities probabilities(const FeatureVector& x) const;

  // argmax with ties resolved toward the earlier class.
  std::pair<StanceLabel, Probabilities> predict(std::string_view post,
                                                std::string_view topic) const;

  // Cross-entropy of one example with the softmax restricted to `class_set`.
  double data_loss(const LabeledFeatures& example, const LabelSet& class_set) const;

  // (l2 / 2) * ||W||^2 over the rows in class_set.
  double penalty(const LabelSet& class_set) const;

  // data_loss + penalty.
  double example_loss(const LabeledFeatures& example, const LabelSet& class_set) const;

  // Mean over examples of the data term, plus the penalty once.
  double objective(std::span<const LabeledFeatures> examples,
                   const LabelSet& class_set) const;

  // Data-term gradient of example_loss (penalty excluded).
  Gradient data_gradient(const LabeledFeatures& example,
                         const LabelSet& class_set) const;

  // Mini-batch SGD on the penalized cross-entropy. Rows outside class_set
  // stay frozen. Throws EmptyTrainingSet / LabelOutsideClassSet.
  TrainReport train(std::span<const StanceExample> examples,
                    const LabelSet& class_set);
  TrainReport train_features(std::span<const LabeledFeatures> examples,
                             const LabelSet& class_set);

  bool all_finite() const;

  // Versioned little-endian binary; see docs/model-format.md.
  std::vector<std::uint8_t> serialize() const;
  static LinearModel deserialize(std::span<const std::uint8_t> bytes);

 private:
  Hyperparameters hyper_;
  std::array<std::vector<double>, kNumLabels> weights_;
  Probabilities bias_{};
};

// Gradient signature used by grad_check; lets tests inject a faulty one.
using GradientFn =
    std::function<Gradient(const LinearModel&, const LabeledFeatures&, const LabelSet&)>;

struct GradCheckOptions {
  std::size_t coordinates = 64;
  double step = 1e-5;
  std::uint64_t seed = 1;
  LabelSet class_set = LabelSet::all();
  GradientFn gradient;  // defaults to LinearModel::data_gradient
};

// Max relative error between the analytic gradient of example_loss and
// central finite differences, over randomly chosen coordinates: bias terms
// and (class, feature) pairs on the example's support. Relative error is
// |a - n| / max(|a|, |n|, 1e-8). The penalty's difference quotient is taken
// on the perturbed coordinate alone, since every other term cancels.
double grad_check(const LinearModel& model, const LabeledFeatures& example,
                  const GradCheckOptions& options = {});

}  // namespace stancekit
