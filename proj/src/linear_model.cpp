#include "stancekit/linear_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <random>

#include "stancekit/error.hpp"
#include "stancekit/random.hpp"

namespace stancekit {

namespace {

constexpr std::string_view kMagic = "STKLINv1";
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::string_view kBackendId = "native-linear";

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

// log-sum-exp of the logits in class_set and the softmax restricted to it.
Probabilities restricted_softmax(const Probabilities& logits,
                                 const LabelSet& class_set, double& log_norm) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (StanceLabel c : kAllLabels) {
    if (class_set.contains(c)) max_logit = std::max(max_logit, logits[index_of(c)]);
  }
  double sum = 0.0;
  Probabilities p{};
  for (StanceLabel c : kAllLabels) {
    if (!class_set.contains(c)) continue;
    p[index_of(c)] = std::exp(logits[index_of(c)] - max_logit);
    sum += p[index_of(c)];
  }
  for (double& v : p) v /= sum;
  log_norm = max_logit + std::log(sum);
  return p;
}

class Writer {
 public:
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() { return bytes(u32()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorCode::ParseError, "model file truncated");
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint32_t feature_index(std::string_view feature) {
  constexpr std::uint64_t basis = 0xcbf29ce484222325ULL ^ kFeatureHashSeed;
  return static_cast<std::uint32_t>(fnv1a64(feature, basis) % kFeatureDim);
}

FeatureVector feature_counts(std::string_view post, std::string_view topic) {
  if (trim(post).empty() || trim(topic).empty()) {
    throw Error(ErrorCode::InvalidArgument, "featurize needs a non-empty post and topic");
  }
  std::vector<std::string> stream = tokenize(post);
  stream.emplace_back(kSeparatorToken);
  for (std::string& t : tokenize(topic)) stream.push_back(std::move(t));

  std::map<std::uint32_t, double> counts;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    counts[feature_index("u:" + stream[i])] += 1.0;
    if (i + 1 < stream.size()) {
      counts[feature_index("b:" + stream[i] + " " + stream[i + 1])] += 1.0;
    }
  }
  FeatureVector out;
  out.reserve(counts.size());
  for (const auto& [index, value] : counts) out.push_back({index, value});
  return out;
}

FeatureVector featurize(std::string_view post, std::string_view topic) {
  FeatureVector x = feature_counts(post, topic);
  double norm = 0.0;
  for (const FeatureEntry& e : x) norm += e.value * e.value;
  norm = std::sqrt(norm);
  for (FeatureEntry& e : x) e.value /= norm;
  return x;
}

void validate(const Hyperparameters& hyper) {
  if (!std::isfinite(hyper.learning_rate) || hyper.learning_rate < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be finite and >= 0");
  }
  if (hyper.epochs < 1) {
    throw Error(ErrorCode::InvalidArgument, "epochs must be at least 1");
  }
  if (!std::isfinite(hyper.l2) || hyper.l2 < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "l2 must be finite and >= 0");
  }
  if (hyper.batch_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "batch_size must be at least 1");
  }
}

LinearModel::LinearModel(Hyperparameters hyper) : hyper_(hyper) {
  validate(hyper_);
  for (auto& row : weights_) row.assign(kFeatureDim, 0.0);
}

void LinearModel::set_hyper(const Hyperparameters& hyper) {
  validate(hyper);
  hyper_ = hyper;
}

void LinearModel::scale(double c) {
  for (auto& row : weights_) {
    for (double& w : row) w *= c;
  }
  for (double& b : bias_) b *= c;
}

Probabilities LinearModel::logits(const FeatureVector& x) const {
  Probabilities z = bias_;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    for (const FeatureEntry& e : x) z[c] += weights_[c][e.index] * e.value;
  }
  return z;
}

Probabilities LinearModel::probabilities(const FeatureVector& x) const {
  double log_norm = 0.0;
  return restricted_softmax(logits(x), LabelSet::all(), log_norm);
}

std::pair<StanceLabel, Probabilities> LinearModel::predict(std::string_view post,
                                                           std::string_view topic) const {
  Probabilities p = probabilities(featurize(post, topic));
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumLabels; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return {kAllLabels[best], p};
}

double LinearModel::data_loss(const LabeledFeatures& example,
                              const LabelSet& class_set) const {
  double log_norm = 0.0;
  Probabilities z = logits(example.features);
  restricted_softmax(z, class_set, log_norm);
  return log_norm - z[index_of(example.label)];
}

double LinearModel::penalty(const LabelSet& class_set) const {
  if (hyper_.l2 == 0.0) return 0.0;
  double sq = 0.0;
  for (StanceLabel c : class_set.labels()) {
    for (double w : weights_[index_of(c)]) sq += w * w;
  }
  return 0.5 * hyper_.l2 * sq;
}

double LinearModel::example_loss(const LabeledFeatures& example,
                                 const LabelSet& class_set) const {
  return data_loss(example, class_set) + penalty(class_set);
}

double LinearModel::objective(std::span<const LabeledFeatures> examples,
                              const LabelSet& class_set) const {
  if (examples.empty()) return penalty(class_set);
  double total = 0.0;
  for (const LabeledFeatures& e : examples) total += data_loss(e, class_set);
  return total / static_cast<double>(examples.size()) + penalty(class_set);
}

Gradient LinearModel::data_gradient(const LabeledFeatures& example,
                                    const LabelSet& class_set) const {
  double log_norm = 0.0;
  Probabilities p = restricted_softmax(logits(example.features), class_set, log_norm);
  Gradient g;
  for (StanceLabel c : class_set.labels()) {
    std::size_t ci = index_of(c);
    double residual = p[ci] - (c == example.label ? 1.0 : 0.0);
    g.bias[ci] = residual;
    g.weights[ci].reserve(example.features.size());
    for (const FeatureEntry& e : example.features) {
      g.weights[ci].emplace_back(e.index, residual * e.value);
    }
  }
  return g;
}

TrainReport LinearModel::train(std::span<const StanceExample> examples,
                               const LabelSet& class_set) {
  std::vector<LabeledFeatures> data;
  data.reserve(examples.size());
  for (const StanceExample& ex : examples) {
    if (!ex.label) {
      throw Error(ErrorCode::LabelOutsideClassSet,
                  "training example " + ex.id + " has no label");
    }
    data.push_back({featurize(ex.post, ex.topic), *ex.label});
  }
  return train_features(data, class_set);
}

TrainReport LinearModel::train_features(std::span<const LabeledFeatures> examples,
                                        const LabelSet& class_set) {
  if (examples.empty()) {
    throw Error(ErrorCode::EmptyTrainingSet, "no training examples");
  }
  if (class_set.empty()) {
    throw Error(ErrorCode::InvalidArgument, "training class set is empty");
  }
  for (const LabeledFeatures& e : examples) {
    if (!class_set.contains(e.label)) {
      throw Error(ErrorCode::LabelOutsideClassSet,
                  "label " + std::string(label_name(e.label)) +
                      " is outside class set {" + to_string(class_set) + "}");
    }
  }

  TrainReport report;
  report.initial_loss = objective(examples, class_set);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(hyper_.seed);
  const std::vector<StanceLabel> rows = class_set.labels();
  const auto batch = static_cast<std::size_t>(hyper_.batch_size);
  const double lr = hyper_.learning_rate;
  const double decay = 1.0 - lr * hyper_.l2;

  for (int epoch = 0; epoch < hyper_.epochs; ++epoch) {
    deterministic_shuffle(std::span<std::size_t>(order), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv_n = 1.0 / static_cast<double>(end - start);

      double batch_loss = 0.0;
      std::vector<Gradient> grads;
      grads.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const LabeledFeatures& e = examples[order[i]];
        batch_loss += data_loss(e, class_set);
        grads.push_back(data_gradient(e, class_set));
      }
      batch_loss *= inv_n;

      // Dense L2 shrink; the squared norm falls out of the same pass.
      double sq = 0.0;
      if (hyper_.l2 != 0.0) {
        for (StanceLabel c : rows) {
          for (double& w : weights_[index_of(c)]) {
            sq += w * w;
            w *= decay;
          }
        }
      }
      batch_loss += 0.5 * hyper_.l2 * sq;

      for (const Gradient& g : grads) {
        for (StanceLabel c : rows) {
          std::size_t ci = index_of(c);
          for (const auto& [index, value] : g.weights[ci]) {
            weights_[ci][index] -= lr * inv_n * value;
          }
          bias_[ci] -= lr * inv_n * g.bias[ci];
        }
      }
      epoch_loss += batch_loss;
      ++batches;
    }
    report.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
    ++report.epochs_run;
    if (!all_finite()) {
      throw Error(ErrorCode::Diverged,
                  "non-finite parameters after epoch " + std::to_string(epoch + 1));
    }
  }
  report.final_loss = objective(examples, class_set);
  return report;
}

bool LinearModel::all_finite() const {
  for (const auto& row : weights_) {
    for (double w : row) {
      if (!std::isfinite(w)) return false;
    }
  }
  return std::all_of(bias_.begin(), bias_.end(), [](double b) { return std::isfinite(b); });
}

std::vector<std::uint8_t> LinearModel::serialize() const {
  Writer w;
  w.bytes(kMagic);
  w.u32(kFormatVersion);
  w.str(kBackendId);
  w.f64(hyper_.learning_rate);
  w.i32(hyper_.epochs);
  w.f64(hyper_.l2);
  w.i32(hyper_.batch_size);
  w.u64(hyper_.seed);
  w.u32(kFeatureDim);
  w.u32(static_cast<std::uint32_t>(kNumLabels));
  for (double b : bias_) w.f64(b);
  for (const auto& row : weights_) {
    std::uint32_t nnz = 0;
    for (double v : row) nnz += std::bit_cast<std::uint64_t>(v) != 0;
    w.u32(nnz);
    for (std::uint32_t i = 0; i < kFeatureDim; ++i) {
      if (std::bit_cast<std::uint64_t>(row[i]) == 0) continue;
      w.u32(i);
      w.f64(row[i]);
    }
  }
  return w.take();
}

LinearModel LinearModel::deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.bytes(kMagic.size()) != kMagic) {
    throw Error(ErrorCode::ParseError, "not a stancekit linear model file");
  }
  if (std::uint32_t version = r.u32(); version != kFormatVersion) {
    throw Error(ErrorCode::ParseError,
                "unsupported model format version " + std::to_string(version));
  }
  if (std::string id = r.str(); id != kBackendId) {
    throw Error(ErrorCode::SnapshotBackendMismatch,
                "model file is for backend '" + id + "'");
  }
  Hyperparameters hyper;
  hyper.learning_rate = r.f64();
  hyper.epochs = r.i32();
  hyper.l2 = r.f64();
  hyper.batch_size = r.i32();
  hyper.seed = r.u64();
  if (r.u32() != kFeatureDim || r.u32() != kNumLabels) {
    throw Error(ErrorCode::ParseError, "model dimensions do not match this build");
  }
  LinearModel model(hyper);
  for (double& b : model.bias_) b = r.f64();
  for (auto& row : model.weights_) {
    std::uint32_t nnz = r.u32();
    std::int64_t previous = -1;
    for (std::uint32_t n = 0; n < nnz; ++n) {
      std::uint32_t index = r.u32();
      if (index >= kFeatureDim || static_cast<std::int64_t>(index) <= previous) {
        throw Error(ErrorCode::ParseError, "model weight indices out of order");
      }
      previous = index;
      row[index] = r.f64();
    }
  }
  if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes in model file");
  if (!model.all_finite()) {
    throw Error(ErrorCode::ParseError, "model file holds non-finite parameters");
  }
  return model;
}

double grad_check(const LinearModel& model, const LabeledFeatures& example,
                  const GradCheckOptions& options) {
  const LabelSet& class_set = options.class_set;
  Gradient analytic = options.gradient
                          ? options.gradient(model, example, class_set)
                          : model.data_gradient(example, class_set);

  struct Coord {
    StanceLabel label;
    std::optional<std::size_t> feature;  // position in example.features; bias if empty
  };
  std::vector<Coord> candidates;
  for (StanceLabel c : class_set.labels()) {
    candidates.push_back({c, std::nullopt});
    for (std::size_t f = 0; f < example.features.size(); ++f) {
      candidates.push_back({c, f});
    }
  }

  auto analytic_value = [&](const Coord& coord) {
    std::size_t ci = index_of(coord.label);
    if (!coord.feature) return analytic.bias[ci];
    std::uint32_t index = example.features[*coord.feature].index;
    double g = 0.0;
    for (const auto& [i, v] : analytic.weights[ci]) {
      if (i == index) g += v;
    }
    return g + model.hyper().l2 * model.weight(coord.label, index);
  };

  std::mt19937_64 rng(options.seed);
  LinearModel probe = model;
  const double h = options.step;
  double worst = 0.0;
  for (std::size_t n = 0; n < options.coordinates; ++n) {
    const Coord& coord = candidates[rng() % candidates.size()];
    double numeric = 0.0;
    if (!coord.feature) {
      double base = model.bias(coord.label);
      probe.set_bias(coord.label, base + h);
      double up = probe.data_loss(example, class_set);
      probe.set_bias(coord.label, base - h);
      double down = probe.data_loss(example, class_set);
      probe.set_bias(coord.label, base);
      numeric = (up - down) / (2 * h);
    } else {
      std::uint32_t index = example.features[*coord.feature].index;
      double base = model.weight(coord.label, index);
      probe.set_weight(coord.label, index, base + h);
      double up = probe.data_loss(example, class_set);
      probe.set_weight(coord.label, index, base - h);
      double down = probe.data_loss(example, class_set);
      probe.set_weight(coord.label, index, base);
      double l2 = model.hyper().l2;
      double pen_up = 0.5 * l2 * (base + h) * (base + h);
      double pen_down = 0.5 * l2 * (base - h) * (base - h);
      numeric = ((up + pen_up) - (down + pen_down)) / (2 * h);
    }
    double a = analytic_value(coord);
    double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace stancekit
