#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

#include "stancekit/prompt_forge.hpp"

namespace stancekit {

struct LlmRequest {
  std::string model_name;
  PromptText prompt;
  double temperature = 0.0;
  int max_tokens = 256;
  // Forwarded to the backend; never part of the cache key.
  std::optional<std::int64_t> seed_hint;
};

struct LlmResponse {
  std::string text;
  bool from_cache = false;
  int attempts = 1;
};

// Hex SHA-256 over a length-prefixed encoding of model name, prompt,
// temperature (%.17g) and max_tokens.
std::string cache_key(const LlmRequest& request);

// Thrown by backends for failures worth retrying (network errors, 429, 5xx).
class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
};

// OpenAI-compatible chat-completion endpoint. The request carries a single
// user message; the reply is choices[0].message.content.
class HttpChatBackend : public CompletionBackend {
 public:
  HttpChatBackend(std::string endpoint, std::string api_key,
                  std::chrono::seconds timeout = std::chrono::seconds(60));

  std::string complete(const LlmRequest& request) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// Reads STANCEKIT_API_KEY; empty string when unset.
std::string api_key_from_environment();

struct MockRule {
  // Every string must occur in the prompt for the rule to match.
  std::vector<std::string> contains;
  // The n-th backend call for one request key receives responses[n], the last
  // entry repeating. The literal "<<transient>>" raises a transient failure.
  std::vector<std::string> responses;
};

struct MockScript {
  std::vector<MockRule> rules;
  bool strict = true;
  std::string fallback;  // used when !strict and nothing matches
};

MockScript load_mock_script(const std::filesystem::path& path);

// Deterministic offline backend. Lookup order: in-memory fixtures, files
// `<digest>.txt` under the fixture directory, then script rules in order.
class MockBackend : public CompletionBackend {
 public:
  explicit MockBackend(MockScript script = {},
                       std::filesystem::path fixture_dir = {});

  void add_fixture(const std::string& key, std::string text);

  std::string complete(const LlmRequest& request) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  MockScript script_;
  std::filesystem::path fixture_dir_;
  std::mutex mu_;
  std::map<std::string, std::string> fixtures_;
  std::map<std::string, std::size_t> cursor_;
  std::atomic<std::size_t> calls_{0};
};

// Directory of one file per key; in-memory only when `dir` is empty.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const LlmRequest& request,
           const std::string& text);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_for(const std::string& key) const;

  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::string> memory_;
};

struct RetryPolicy {
  int max_attempts = 5;
  double base_delay_ms = 500.0;
  double multiplier = 2.0;

  bool operator==(const RetryPolicy&) const = default;
};

struct GatewayOptions {
  RetryPolicy retry;
  std::filesystem::path cache_dir;
  std::size_t max_in_flight = 4;
  // Injected so tests do not sleep; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct CallOptions {
  bool bypass_cache = false;
};

struct GatewayStats {
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t transient_failures = 0;
};

class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<CompletionBackend> backend, GatewayOptions options);

  // Cache hit returns without touching the backend. Otherwise retries
  // transient failures with exponential backoff and throws
  // Error(BackendExhausted) after max_attempts. A bypassed call still stores
  // its result.
  LlmResponse complete(const LlmRequest& request, CallOptions call = {});

  GatewayStats stats() const;

 private:
  std::shared_ptr<CompletionBackend> backend_;
  GatewayOptions options_;
  ResponseCache cache_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> transient_failures_{0};
};

}  // namespace stancekit
