#include "stancekit/llm_gateway.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "http_transport.hpp"
#include "stancekit/error.hpp"

namespace stancekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kTransientMarker = "<<transient>>";
constexpr std::string_view kCacheMagic = "stancekit-cache 1";

void append_field(std::string& out, std::string_view field) {
  out += std::to_string(field.size());
  out += ':';
  out += field;
}

std::string to_hex(const unsigned char* bytes, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    out += kDigits[bytes[i] >> 4];
    out += kDigits[bytes[i] & 0xf];
  }
  return out;
}

void validate(const LlmRequest& request) {
  if (request.prompt.text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "LLM request has an empty prompt");
  }
  if (!std::isfinite(request.temperature) || request.temperature < 0.0) {
    throw Error(ErrorCode::InvalidArgument,
                "LLM temperature must be finite and non-negative");
  }
  if (request.max_tokens <= 0) {
    throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string cache_key(const LlmRequest& request) {
  char temperature[64];
  std::snprintf(temperature, sizeof temperature, "%.17g", request.temperature);
  std::string material = "stancekit/llm-request/v1;";
  append_field(material, request.model_name);
  append_field(material, request.prompt.text);
  append_field(material, temperature);
  append_field(material, std::to_string(request.max_tokens));

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::BackendError, "SHA-256 digest failed");
  }
  return to_hex(digest, len);
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpChatBackend::HttpChatBackend(std::string endpoint, std::string api_key,
                                 std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      timeout_(timeout) {}

std::string HttpChatBackend::complete(const LlmRequest& request) {
  json body = {
      {"model", request.model_name},
      {"messages", json::array({{{"role", "user"},
                                 {"content", request.prompt.text}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  if (request.seed_hint) body["seed"] = *request.seed_hint;

  detail::Headers headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  detail::HttpReply reply =
      detail::http_post_json(endpoint_, body.dump(), headers, timeout_);
  if (detail::is_transient_status(reply.status)) {
    throw TransientBackendError("chat endpoint returned HTTP " +
                                std::to_string(reply.status));
  }
  if (reply.status != 200) {
    throw Error(ErrorCode::BackendError,
                "chat endpoint returned HTTP " + std::to_string(reply.status) +
                    ": " + reply.body.substr(0, 200));
  }
  try {
    json parsed = json::parse(reply.body);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError,
                std::string("unexpected chat completion body: ") + e.what());
  }
}

std::string api_key_from_environment() {
  const char* key = std::getenv("STANCEKIT_API_KEY");
  return key ? key : "";
}

// ---------------------------------------------------------------------------
// Mock backend

MockScript load_mock_script(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config,
                "mock script " + path.string() + ": " + e.what());
  }
  MockScript script;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "strict") {
        script.strict = value.get<bool>();
      } else if (key == "fallback") {
        script.fallback = value.get<std::string>();
      } else if (key == "rules") {
        for (const json& r : value) {
          MockRule rule;
          const json& contains = r.at("contains");
          if (contains.is_string()) {
            rule.contains.push_back(contains.get<std::string>());
          } else {
            rule.contains = contains.get<std::vector<std::string>>();
          }
          if (r.contains("response")) {
            rule.responses.push_back(r.at("response").get<std::string>());
          } else {
            rule.responses = r.at("responses").get<std::vector<std::string>>();
          }
          if (rule.responses.empty()) {
            throw Error(ErrorCode::Config, "mock rule without responses");
          }
          script.rules.push_back(std::move(rule));
        }
      } else {
        throw Error(ErrorCode::Config, "unknown mock script key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config,
                "mock script " + path.string() + ": " + e.what());
  }
  return script;
}

MockBackend::MockBackend(MockScript script, fs::path fixture_dir)
    : script_(std::move(script)), fixture_dir_(std::move(fixture_dir)) {}

void MockBackend::add_fixture(const std::string& key, std::string text) {
  std::lock_guard lock(mu_);
  fixtures_[key] = std::move(text);
}

std::string MockBackend::complete(const LlmRequest& request) {
  ++calls_;
  const std::string key = cache_key(request);
  std::string response;
  {
    std::lock_guard lock(mu_);
    if (auto it = fixtures_.find(key); it != fixtures_.end()) return it->second;
  }
  if (!fixture_dir_.empty()) {
    fs::path file = fixture_dir_ / (key + ".txt");
    if (fs::exists(file)) return read_file(file);
  }

  bool matched = false;
  for (std::size_t r = 0; r < script_.rules.size() && !matched; ++r) {
    const MockRule& rule = script_.rules[r];
    bool all = true;
    for (const std::string& needle : rule.contains) {
      if (request.prompt.text.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (!all) continue;
    std::lock_guard lock(mu_);
    std::size_t& n = cursor_[std::to_string(r) + "/" + key];
    response = rule.responses[std::min(n, rule.responses.size() - 1)];
    ++n;
    matched = true;
  }
  if (!matched) {
    if (script_.strict) {
      throw Error(ErrorCode::MockMiss, "no mock fixture for request " + key);
    }
    response = script_.fallback;
  }
  if (response == kTransientMarker) {
    throw TransientBackendError("scripted transient failure");
  }
  return response;
}

// ---------------------------------------------------------------------------
// Cache
//
// File layout, one file per key named <key>.txt:
//   stancekit-cache 1\n
//   key <hex>\n
//   model <model name>\n
//   created_at <UTC ISO-8601>\n
//   length <byte count>\n
//   \n
//   <raw response bytes>

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) fs::create_directories(dir_);
}

fs::path ResponseCache::file_for(const std::string& key) const {
  return dir_ / (key + ".txt");
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (dir_.empty()) return std::nullopt;
  fs::path file = file_for(key);
  if (!fs::exists(file)) return std::nullopt;

  std::string raw = read_file(file);
  std::size_t pos = 0;
  std::size_t length = std::string::npos;
  bool header_ok = false;
  while (pos < raw.size()) {
    std::size_t eol = raw.find('\n', pos);
    if (eol == std::string::npos) break;
    std::string_view line(raw.data() + pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) {
      header_ok = true;
      break;
    }
    if (line.rfind("length ", 0) == 0) {
      std::string_view digits = line.substr(7);
      std::size_t value = 0;
      auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      if (ec == std::errc() && end == digits.data() + digits.size()) length = value;
    }
  }
  if (!header_ok || length == std::string::npos || raw.size() - pos != length ||
      raw.rfind(kCacheMagic, 0) != 0) {
    // Torn or foreign file: treat as a miss, it will be rewritten.
    return std::nullopt;
  }
  std::string text = raw.substr(pos);
  memory_[key] = text;
  return text;
}

void ResponseCache::put(const std::string& key, const LlmRequest& request,
                        const std::string& text) {
  std::lock_guard lock(mu_);
  memory_[key] = text;
  if (dir_.empty()) return;

  std::string model = request.model_name;
  for (char& c : model) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  fs::path final_path = file_for(key);
  fs::path tmp = final_path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << kCacheMagic << '\n'
        << "key " << key << '\n'
        << "model " << model << '\n'
        << "created_at " << utc_timestamp() << '\n'
        << "length " << text.size() << '\n'
        << '\n'
        << text;
  }
  fs::rename(tmp, final_path);
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(std::shared_ptr<CompletionBackend> backend,
                       GatewayOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      cache_(options_.cache_dir),
      in_flight_(static_cast<std::ptrdiff_t>(
          std::clamp<std::size_t>(options_.max_in_flight, 1, 1024))) {
  if (!backend_) {
    throw Error(ErrorCode::Config, "LLM gateway has no backend configured");
  }
  if (options_.retry.max_attempts < 1) {
    throw Error(ErrorCode::Config, "retry.max_attempts must be at least 1");
  }
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

LlmResponse LlmGateway::complete(const LlmRequest& request, CallOptions call) {
  validate(request);
  const std::string key = cache_key(request);
  if (!call.bypass_cache) {
    if (auto hit = cache_.get(key)) {
      ++cache_hits_;
      return {*hit, true, 1};
    }
  }

  std::string text;
  int attempt = 0;
  {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<1024>& sem;
      ~Release() { sem.release(); }
    } release{in_flight_};

    double delay_ms = options_.retry.base_delay_ms;
    for (attempt = 1;; ++attempt) {
      ++backend_calls_;
      try {
        text = backend_->complete(request);
        break;
      } catch (const TransientBackendError& e) {
        ++transient_failures_;
        if (attempt >= options_.retry.max_attempts) {
          throw Error(ErrorCode::BackendExhausted,
                      "gave up after " + std::to_string(attempt) +
                          " attempts: " + e.what());
        }
        options_.sleep(std::chrono::milliseconds(
            static_cast<std::int64_t>(std::max(0.0, delay_ms))));
        delay_ms *= options_.retry.multiplier;
      }
    }
  }
  cache_.put(key, request, text);
  return {text, false, attempt};
}

GatewayStats LlmGateway::stats() const {
  return {backend_calls_.load(), cache_hits_.load(), transient_failures_.load()};
}

}  // namespace stancekit
