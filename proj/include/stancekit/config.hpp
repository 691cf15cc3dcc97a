#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "stancekit/adapt.hpp"
#include "stancekit/classifier.hpp"
#include "stancekit/datagen.hpp"
#include "stancekit/dataset_io.hpp"
#include "stancekit/linear_model.hpp"
#include "stancekit/llm_gateway.hpp"

namespace stancekit {

struct MockSettings {
  bool enabled = false;
  std::string script;        // JSON MockScript file
  std::string fixtures_dir;  // <digest>.txt response files

  bool operator==(const MockSettings&) const = default;
};

struct GatewaySettings {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double generation_temperature = 0.7;
  double classification_temperature = 0.0;
  int generation_max_tokens = 512;
  int classification_max_tokens = 8;
  RetryPolicy retry;
  std::string cache_dir;
  std::size_t max_in_flight = 4;
  int timeout_seconds = 60;
  MockSettings mock;

  bool operator==(const GatewaySettings&) const = default;
};

struct DatagenSettings {
  int parse_retries = 2;
  bool strict_length = false;
  std::string variant_suffix = DatagenConfig{}.variant_suffix;
  std::size_t workers = 1;

  bool operator==(const DatagenSettings&) const = default;
};

struct AdaptSettings {
  std::size_t k = 3;
  LabelMode label_mode = LabelMode::Two;
  Grouping grouping = Grouping::PerTopic;
  HyperOverrides finetune;
  std::size_t workers = 1;

  bool operator==(const AdaptSettings&) const = default;
};

struct ClassifierSettings {
  double learning_rate = 0.1;
  int epochs = 10;
  double l2 = 1e-4;
  int batch_size = 8;

  bool operator==(const ClassifierSettings&) const = default;
};

struct ClassifyLlmSettings {
  int retries = 2;
  StanceLabel fallback = StanceLabel::Neutral;

  bool operator==(const ClassifyLlmSettings&) const = default;
};

struct DatasetSettings {
  VastColumns vast_columns;
  // format name -> label scheme name
  std::map<std::string, std::string> label_schemes;

  bool operator==(const DatasetSettings&) const = default;
};

// Whole-run configuration, loaded from one JSON file. Unknown keys and
// out-of-range values are rejected with Error(Config). The API key is never
// part of it.
struct RunConfig {
  std::uint64_t seed = 0;
  GatewaySettings gateway;
  DatagenSettings datagen;
  AdaptSettings adapt;
  ClassifierSettings classifier;
  ClassifyLlmSettings classify_llm;
  DatasetSettings datasets;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);
void validate(const RunConfig& config);

// Derived per-module settings. Seeds follow derive_seed(config.seed, name)
// with stream names "classifier", "adapt" and "sample".
DatagenConfig datagen_config(const RunConfig& config);
AdaptConfig adapt_config(const RunConfig& config);
Hyperparameters classifier_hyper(const RunConfig& config);
LlmClassifyOptions classify_options(const RunConfig& config);
ReadOptions read_options(const RunConfig& config, FormatTag format);
std::uint64_t sample_seed(const RunConfig& config);

// Mock backend when gateway.mock.enabled, otherwise the HTTP endpoint with
// STANCEKIT_API_KEY.
std::unique_ptr<LlmGateway> make_gateway(const RunConfig& config);

}  // namespace stancekit
