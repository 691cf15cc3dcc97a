#pragma once

// Shared fixtures for the unit and acceptance tests: temp directories,
// scripted backends, synthetic corpora and independent metric oracles.

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/adapt.hpp"
#include "stancekit/classifier.hpp"
#include "stancekit/core.hpp"
#include "stancekit/datagen.hpp"
#include "stancekit/linear_model.hpp"
#include "stancekit/llm_gateway.hpp"
#include "stancekit/metrics.hpp"
#include "stancekit/random.hpp"

namespace stancekit::testing {

class TempDir {
 public:
  explicit TempDir(std::string_view tag = "t") {
    static std::atomic<int> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("stancekit-" + std::string(tag) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Backend driven by a callback; counts calls.
class FunctionBackend : public CompletionBackend {
 public:
  using Fn = std::function<std::string(const LlmRequest&, std::size_t call)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const LlmRequest& request) override {
    std::size_t n = calls_++;
    return fn_(request, n);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  Fn fn_;
  std::atomic<std::size_t> calls_{0};
};

inline GatewayOptions quiet_options(std::filesystem::path cache_dir = {}) {
  GatewayOptions o;
  o.cache_dir = std::move(cache_dir);
  o.sleep = [](std::chrono::milliseconds) {};
  return o;
}

inline std::unique_ptr<LlmGateway> gateway_for(std::shared_ptr<CompletionBackend> backend,
                                               std::filesystem::path cache_dir = {}) {
  return std::make_unique<LlmGateway>(std::move(backend), quiet_options(std::move(cache_dir)));
}

// Text between "<key>: " and the end of that line in a rendered prompt.
inline std::string prompt_field(std::string_view prompt, std::string_view key) {
  std::string needle = "\n" + std::string(key) + ": ";
  auto pos = prompt.find(needle);
  if (pos == std::string_view::npos) return {};
  pos += needle.size();
  auto end = prompt.find('\n', pos);
  return std::string(prompt.substr(pos, end == std::string_view::npos ? end : end - pos));
}

inline bool is_post_generation(std::string_view prompt) {
  return prompt.rfind("Your task is to generate a human written post.", 0) == 0;
}

inline bool is_topic_generation(std::string_view prompt) {
  return prompt.rfind("List the most potential topics", 0) == 0;
}

// ---------------------------------------------------------------------------
// Metric oracle: a full 3x3 confusion matrix and F1 as 2tp / (2tp + fp + fn).

struct OracleScores {
  std::array<double, kNumLabels> precision{};
  std::array<double, kNumLabels> recall{};
  std::array<double, kNumLabels> f1{};
};

inline OracleScores oracle_scores(const std::vector<StanceLabel>& gold,
                                  const std::vector<StanceLabel>& pred) {
  std::array<std::array<double, kNumLabels>, kNumLabels> m{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    m[index_of(gold[i])][index_of(pred[i])] += 1.0;
  }
  OracleScores s;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    double tp = m[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < kNumLabels; ++o) {
      if (o == c) continue;
      fp += m[o][c];
      fn += m[c][o];
    }
    s.precision[c] = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    s.recall[c] = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    s.f1[c] = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  }
  return s;
}

inline double oracle_macro(const std::vector<StanceLabel>& gold,
                           const std::vector<StanceLabel>& pred, const LabelSet& classes) {
  OracleScores s = oracle_scores(gold, pred);
  double sum = 0;
  for (StanceLabel l : classes.labels()) sum += s.f1[index_of(l)];
  return sum / static_cast<double>(classes.size());
}

inline StanceLabel random_label(std::mt19937_64& rng, std::size_t n_classes = 3) {
  return static_cast<StanceLabel>(rng() % n_classes);
}

// ---------------------------------------------------------------------------
// Random text and corpora.

inline std::string random_word(std::mt19937_64& rng) {
  static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
  std::size_t len = 2 + rng() % 7;
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += kLetters[rng() % kLetters.size()];
  return w;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t min_words,
                               std::size_t max_words) {
  std::size_t n = min_words + rng() % (max_words - min_words + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += random_word(rng);
  }
  return out;
}

// Each class owns a disjoint cue vocabulary; every post has at least two cue
// words of its class plus shared filler, so the corpus is linearly separable.
inline std::vector<StanceExample> separable_corpus(std::size_t n, std::uint64_t seed,
                                                   LabelSet classes = LabelSet::all()) {
  std::mt19937_64 rng(seed);
  const std::array<std::vector<std::string>, kNumLabels> cues = {{
      {"splendid", "support", "favour", "endorse", "applaud", "welcome"},
      {"oppose", "reject", "harmful", "condemn", "dreadful", "against"},
      {"unsure", "perhaps", "mixed", "unclear", "balanced", "maybe"},
  }};
  const std::vector<std::string> filler = {"the", "policy", "people", "today", "city",
                                           "plan", "news", "vote", "story", "report"};
  std::vector<StanceLabel> labels = classes.labels();
  std::vector<StanceExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    StanceLabel label = labels[i % labels.size()];
    std::vector<std::string> words;
    const auto& cue = cues[index_of(label)];
    std::size_t n_cue = 2 + rng() % 2;
    for (std::size_t j = 0; j < n_cue; ++j) words.push_back(cue[rng() % cue.size()]);
    std::size_t n_fill = 3 + rng() % 4;
    for (std::size_t j = 0; j < n_fill; ++j) words.push_back(filler[rng() % filler.size()]);
    for (std::size_t j = words.size(); j > 1; --j) std::swap(words[j - 1], words[rng() % j]);
    std::string post;
    for (const auto& w : words) post += (post.empty() ? "" : " ") + w;
    out.push_back({"sep:" + std::to_string(i), post, "general issue", label,
                   ExampleSource::Real});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptation scenario: each topic has private pro/con vocabulary; test posts
// carry one side's private words. The mock LLM writes posts with the
// requested side's words, so only the generated data reveals the cues.

struct ScenarioTopic {
  std::string topic;
  std::vector<std::string> pro_words;
  std::vector<std::string> con_words;
};

inline std::vector<ScenarioTopic> scenario_topics() {
  return {
      {"solar subsidies", {"sunbright", "panelgood", "rayhope"},
       {"costsink", "roofruin", "glarebad"}},
      {"school uniforms", {"neattidy", "equalkids", "proudcrest"},
       {"stiffcollar", "drabgrey", "costlyblazer"}},
      {"city cycling lanes", {"safepedal", "greenroute", "quickbike"},
       {"jammedroad", "lostparking", "narrowlane"}},
  };
}

inline std::string scenario_post(const ScenarioTopic& t, StanceLabel label,
                                 std::mt19937_64& rng) {
  const auto& words = label == StanceLabel::Pro ? t.pro_words : t.con_words;
  std::string post = "people were talking about " + t.topic + " again";
  for (int i = 0; i < 3; ++i) post += " " + words[rng() % words.size()];
  return post;
}

inline Dataset scenario_test_set(std::size_t per_topic, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d(FormatTag::Vast);
  std::size_t id = 0;
  for (const auto& t : scenario_topics()) {
    for (std::size_t i = 0; i < per_topic; ++i) {
      StanceLabel label = i % 2 == 0 ? StanceLabel::Pro : StanceLabel::Con;
      d.add({"scn:" + std::to_string(id++), scenario_post(t, label, rng), t.topic, label,
             ExampleSource::Real});
    }
  }
  return d;
}

// Mock LLM for the scenario: answers post-generation prompts with a post in
// the requested stance using the topic's private words.
inline std::shared_ptr<FunctionBackend> scenario_llm() {
  return std::make_shared<FunctionBackend>([](const LlmRequest& r, std::size_t) {
    const std::string& p = r.prompt.text;
    if (!is_post_generation(p)) return std::string("neutral");
    std::string topic = prompt_field(p, "topic");
    std::string stance = prompt_field(p, "stance");
    std::mt19937_64 rng(fnv1a64(p));
    for (const auto& t : scenario_topics()) {
      if (t.topic == topic) {
        return scenario_post(t, stance == "agree" ? StanceLabel::Pro : StanceLabel::Con, rng);
      }
    }
    return std::string("I have thoughts about ") + topic;
  });
}

}  // namespace stancekit::testing
