#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/core.hpp"
#include "stancekit/linear_model.hpp"
#include "stancekit/llm_gateway.hpp"

namespace stancekit {

struct Capabilities {
  bool trainable = false;
  bool snapshotable = false;
};

struct Prediction {
  StanceLabel label = StanceLabel::Pro;
  Probabilities probabilities{};
};

struct ClassifierSnapshot {
  std::string backend_id;
  std::vector<std::uint8_t> state;

  bool operator==(const ClassifierSnapshot&) const = default;
};

// Partial override of a backend's training hyperparameters.
struct HyperOverrides {
  std::optional<double> learning_rate;
  std::optional<int> epochs;
  std::optional<double> l2;
  std::optional<int> batch_size;
  std::optional<std::uint64_t> seed;

  Hyperparameters apply(Hyperparameters base) const;
  bool operator==(const HyperOverrides&) const = default;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;

  virtual std::string backend_id() const = 0;
  virtual Capabilities capabilities() const = 0;

  virtual Prediction predict(std::string_view post, std::string_view topic) const = 0;

  // Default implementations throw Error(NotSupported).
  virtual TrainReport train(std::span<const StanceExample> examples,
                            const LabelSet& class_set,
                            const HyperOverrides& overrides);
  virtual ClassifierSnapshot snapshot() const;
  // Throws Error(SnapshotBackendMismatch) for a foreign snapshot.
  virtual void restore(const ClassifierSnapshot& snapshot);

  // Independent copy, or nullptr when the backend cannot be duplicated
  // locally (remote state).
  virtual std::unique_ptr<ClassifierBackend> clone() const { return nullptr; }
};

// Wraps LinearModel. Snapshot state is LinearModel::serialize().
class LinearBackend : public ClassifierBackend {
 public:
  static constexpr std::string_view kId = "native-linear";

  explicit LinearBackend(LinearModel model = LinearModel{});

  static LinearBackend load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::string backend_id() const override { return std::string(kId); }
  Capabilities capabilities() const override { return {true, true}; }
  Prediction predict(std::string_view post, std::string_view topic) const override;
  TrainReport train(std::span<const StanceExample> examples, const LabelSet& class_set,
                    const HyperOverrides& overrides) override;
  ClassifierSnapshot snapshot() const override;
  void restore(const ClassifierSnapshot& snapshot) override;
  std::unique_ptr<ClassifierBackend> clone() const override;

  const LinearModel& model() const { return model_; }
  LinearModel& model() { return model_; }

 private:
  LinearModel model_;
};

struct LlmClassifyOptions {
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 8;
  // Fresh, cache-bypassing calls after an unparseable answer.
  int retries = 2;
};

// Trims punctuation from each whitespace-separated word, lowercases it, and
// returns the first word in the llm-answer vocabulary.
std::optional<StanceLabel> parse_llm_answer(std::string_view text);

// Zero-shot classification with the stance prompt. Throws
// Error(UnparseableAnswer) once retries are exhausted.
StanceLabel llm_classify(std::string_view post, std::string_view topic,
                         LlmGateway& gateway, const LlmClassifyOptions& options = {});

// llm_classify as a read-only backend. Unparseable answers fall back to
// `fallback` (Neutral by default) and are counted.
class LlmBackend : public ClassifierBackend {
 public:
  LlmBackend(LlmGateway& gateway, LlmClassifyOptions options = {},
             StanceLabel fallback = StanceLabel::Neutral);

  std::string backend_id() const override { return "llm-zero-shot"; }
  Capabilities capabilities() const override { return {false, false}; }
  Prediction predict(std::string_view post, std::string_view topic) const override;

  std::size_t unparseable() const { return unparseable_.load(); }

 private:
  LlmGateway& gateway_;
  LlmClassifyOptions options_;
  StanceLabel fallback_;
  mutable std::atomic<std::size_t> unparseable_{0};
};

// Suggested fine-tuning defaults for a served transformer.
inline constexpr Hyperparameters kRemoteSuggestedHyper{1e-5, 10, 0.0, 8, 0};

// Client for a model served over HTTP. Three endpoints, all POST with JSON
// bodies (see docs/remote-backend.md):
//   <base>/predict   {"post","topic"} -> {"label","probabilities"}
//   <base>/train     {"examples","class_set","hyper"} -> {"epoch_losses",...}
//   <base>/snapshot  {"op":"take"} -> {"backend_id","state"}   (state is base64)
//                    {"op":"restore","state"} -> {"ok":true}
class RemoteBackend : public ClassifierBackend {
 public:
  explicit RemoteBackend(std::string base_url,
                         std::chrono::seconds timeout = std::chrono::seconds(120));

  std::string backend_id() const override;
  Capabilities capabilities() const override { return {true, true}; }
  Prediction predict(std::string_view post, std::string_view topic) const override;
  TrainReport train(std::span<const StanceExample> examples, const LabelSet& class_set,
                    const HyperOverrides& overrides) override;
  ClassifierSnapshot snapshot() const override;
  void restore(const ClassifierSnapshot& snapshot) override;

 private:
  std::string call(std::string_view endpoint, const std::string& body) const;

  std::string base_url_;
  std::chrono::seconds timeout_;
};

namespace remote {

std::string encode_base64(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> decode_base64(std::string_view text);

struct Reply {
  int status = 200;
  std::string body;
};

// Server side of the protocol: serves `backend` for endpoint "predict",
// "train" or "snapshot". Errors come back as {"error":{"code","message"}}
// with status 400 (data) or 500.
Reply handle(ClassifierBackend& backend, std::string_view endpoint,
             const std::string& body);

}  // namespace remote

}  // namespace stancekit
