#include "stancekit/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "stancekit/error.hpp"
#include "stancekit/random.hpp"

namespace stancekit {

using nlohmann::json;

namespace {

// Reads members of one JSON object and rejects any key nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail("expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.count(key)) fail("unknown key '" + key + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(std::string(key) + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(std::string(key) + ": " + e.what());
    }
  }

  // Runs fn(Section&) on a nested object if present.
  template <typename Fn>
  void nested(const char* key, Fn&& fn) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    Section child(*it, path_ + "." + key);
    fn(child);
  }

  template <typename Enum, typename Parse>
  void get_enum(const char* key, Enum& out, Parse&& parse) {
    std::optional<std::string> text;
    get_optional(key, text);
    if (!text) return;
    try {
      out = parse(*text);
    } catch (const Error& e) {
      fail(std::string(key) + ": " + e.what());
    }
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorCode::Config, "config " + path_ + ": " + message);
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::Config, "config: " + message);
}

json overrides_json(const HyperOverrides& o) {
  json out = json::object();
  if (o.learning_rate) out["learning_rate"] = *o.learning_rate;
  if (o.epochs) out["epochs"] = *o.epochs;
  if (o.l2) out["l2"] = *o.l2;
  if (o.batch_size) out["batch_size"] = *o.batch_size;
  if (o.seed) out["seed"] = *o.seed;
  return out;
}

}  // namespace

void validate(const RunConfig& c) {
  const GatewaySettings& g = c.gateway;
  require(std::isfinite(g.generation_temperature) && g.generation_temperature >= 0.0 &&
              g.generation_temperature <= 2.0,
          "gateway.generation_temperature must be in [0, 2]");
  require(std::isfinite(g.classification_temperature) && g.classification_temperature >= 0.0 &&
              g.classification_temperature <= 2.0,
          "gateway.classification_temperature must be in [0, 2]");
  require(g.generation_max_tokens > 0, "gateway.generation_max_tokens must be positive");
  require(g.classification_max_tokens > 0, "gateway.classification_max_tokens must be positive");
  require(g.retry.max_attempts >= 1 && g.retry.max_attempts <= 100,
          "gateway.retry.max_attempts must be in [1, 100]");
  require(g.retry.base_delay_ms >= 0.0 && std::isfinite(g.retry.base_delay_ms),
          "gateway.retry.base_delay_ms must be >= 0");
  require(g.retry.multiplier >= 1.0 && std::isfinite(g.retry.multiplier),
          "gateway.retry.multiplier must be >= 1");
  require(g.max_in_flight >= 1 && g.max_in_flight <= 1024,
          "gateway.max_in_flight must be in [1, 1024]");
  require(g.timeout_seconds >= 1, "gateway.timeout_seconds must be positive");
  require(!g.model.empty(), "gateway.model is empty");
  require(c.datagen.parse_retries >= 0 && c.datagen.parse_retries <= 20,
          "datagen.parse_retries must be in [0, 20]");
  require(c.datagen.workers >= 1, "datagen.workers must be at least 1");
  require(c.adapt.k >= 1, "adapt.k must be at least 1");
  require(c.adapt.workers >= 1, "adapt.workers must be at least 1");
  require(c.classify_llm.retries >= 0 && c.classify_llm.retries <= 20,
          "classify_llm.retries must be in [0, 20]");
  for (const auto& [format, scheme] : c.datasets.label_schemes) {
    try {
      format_from_name(format);
      LabelScheme::builtin(scheme);
    } catch (const Error& e) {
      require(false, std::string("datasets.label_schemes: ") + e.what());
    }
  }
  try {
    classifier_hyper(c);
    c.adapt.finetune.apply(classifier_hyper(c));
  } catch (const Error& e) {
    require(false, e.what());
  }
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    Section root(doc, "$");
    root.get("seed", c.seed);
    root.nested("gateway", [&](Section& s) {
      GatewaySettings& g = c.gateway;
      s.get("endpoint", g.endpoint);
      s.get("model", g.model);
      s.get("generation_temperature", g.generation_temperature);
      s.get("classification_temperature", g.classification_temperature);
      s.get("generation_max_tokens", g.generation_max_tokens);
      s.get("classification_max_tokens", g.classification_max_tokens);
      s.get("cache_dir", g.cache_dir);
      s.get("max_in_flight", g.max_in_flight);
      s.get("timeout_seconds", g.timeout_seconds);
      s.nested("retry", [&](Section& r) {
        r.get("max_attempts", g.retry.max_attempts);
        r.get("base_delay_ms", g.retry.base_delay_ms);
        r.get("multiplier", g.retry.multiplier);
      });
      s.nested("mock", [&](Section& m) {
        m.get("enabled", g.mock.enabled);
        m.get("script", g.mock.script);
        m.get("fixtures_dir", g.mock.fixtures_dir);
      });
    });
    root.nested("datagen", [&](Section& s) {
      s.get("parse_retries", c.datagen.parse_retries);
      s.get("strict_length", c.datagen.strict_length);
      s.get("variant_suffix", c.datagen.variant_suffix);
      s.get("workers", c.datagen.workers);
    });
    root.nested("adapt", [&](Section& s) {
      s.get("k", c.adapt.k);
      s.get_enum("label_mode", c.adapt.label_mode, label_mode_from_name);
      s.get_enum("grouping", c.adapt.grouping, grouping_from_name);
      s.get("workers", c.adapt.workers);
      s.nested("finetune", [&](Section& f) {
        f.get_optional("learning_rate", c.adapt.finetune.learning_rate);
        f.get_optional("epochs", c.adapt.finetune.epochs);
        f.get_optional("l2", c.adapt.finetune.l2);
        f.get_optional("batch_size", c.adapt.finetune.batch_size);
        f.get_optional("seed", c.adapt.finetune.seed);
      });
    });
    root.nested("classifier", [&](Section& s) {
      s.get("learning_rate", c.classifier.learning_rate);
      s.get("epochs", c.classifier.epochs);
      s.get("l2", c.classifier.l2);
      s.get("batch_size", c.classifier.batch_size);
    });
    root.nested("classify_llm", [&](Section& s) {
      s.get("retries", c.classify_llm.retries);
      s.get_enum("fallback", c.classify_llm.fallback, label_from_name);
    });
    root.nested("datasets", [&](Section& s) {
      s.nested("vast_columns", [&](Section& v) {
        v.get("post", c.datasets.vast_columns.post);
        v.get("topic", c.datasets.vast_columns.topic);
        v.get("label", c.datasets.vast_columns.label);
      });
      s.get("label_schemes", c.datasets.label_schemes);
    });
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path));
}

std::string serialize_config(const RunConfig& c) {
  const GatewaySettings& g = c.gateway;
  json doc = {
      {"seed", c.seed},
      {"gateway",
       {{"endpoint", g.endpoint},
        {"model", g.model},
        {"generation_temperature", g.generation_temperature},
        {"classification_temperature", g.classification_temperature},
        {"generation_max_tokens", g.generation_max_tokens},
        {"classification_max_tokens", g.classification_max_tokens},
        {"cache_dir", g.cache_dir},
        {"max_in_flight", g.max_in_flight},
        {"timeout_seconds", g.timeout_seconds},
        {"retry",
         {{"max_attempts", g.retry.max_attempts},
          {"base_delay_ms", g.retry.base_delay_ms},
          {"multiplier", g.retry.multiplier}}},
        {"mock",
         {{"enabled", g.mock.enabled},
          {"script", g.mock.script},
          {"fixtures_dir", g.mock.fixtures_dir}}}}},
      {"datagen",
       {{"parse_retries", c.datagen.parse_retries},
        {"strict_length", c.datagen.strict_length},
        {"variant_suffix", c.datagen.variant_suffix},
        {"workers", c.datagen.workers}}},
      {"adapt",
       {{"k", c.adapt.k},
        {"label_mode", label_mode_name(c.adapt.label_mode)},
        {"grouping", grouping_name(c.adapt.grouping)},
        {"workers", c.adapt.workers},
        {"finetune", overrides_json(c.adapt.finetune)}}},
      {"classifier",
       {{"learning_rate", c.classifier.learning_rate},
        {"epochs", c.classifier.epochs},
        {"l2", c.classifier.l2},
        {"batch_size", c.classifier.batch_size}}},
      {"classify_llm",
       {{"retries", c.classify_llm.retries},
        {"fallback", label_name(c.classify_llm.fallback)}}},
      {"datasets",
       {{"vast_columns",
         {{"post", c.datasets.vast_columns.post},
          {"topic", c.datasets.vast_columns.topic},
          {"label", c.datasets.vast_columns.label}}},
        {"label_schemes", c.datasets.label_schemes}}},
  };
  return doc.dump(2) + "\n";
}

DatagenConfig datagen_config(const RunConfig& c) {
  DatagenConfig d;
  d.model_name = c.gateway.model;
  d.generation_temperature = c.gateway.generation_temperature;
  d.topic_max_tokens = c.gateway.generation_max_tokens;
  d.post_max_tokens = c.gateway.generation_max_tokens;
  d.parse_retries = c.datagen.parse_retries;
  d.strict_length = c.datagen.strict_length;
  d.variant_suffix = c.datagen.variant_suffix;
  d.workers = c.datagen.workers;
  return d;
}

AdaptConfig adapt_config(const RunConfig& c) {
  AdaptConfig a;
  a.k = c.adapt.k;
  a.label_mode = c.adapt.label_mode;
  a.grouping = c.adapt.grouping;
  a.finetune = c.adapt.finetune;
  a.workers = c.adapt.workers;
  a.seed = derive_seed(c.seed, "adapt");
  return a;
}

Hyperparameters classifier_hyper(const RunConfig& c) {
  Hyperparameters h;
  h.learning_rate = c.classifier.learning_rate;
  h.epochs = c.classifier.epochs;
  h.l2 = c.classifier.l2;
  h.batch_size = c.classifier.batch_size;
  h.seed = derive_seed(c.seed, "classifier");
  validate(h);
  return h;
}

LlmClassifyOptions classify_options(const RunConfig& c) {
  LlmClassifyOptions o;
  o.model_name = c.gateway.model;
  o.temperature = c.gateway.classification_temperature;
  o.max_tokens = c.gateway.classification_max_tokens;
  o.retries = c.classify_llm.retries;
  return o;
}

ReadOptions read_options(const RunConfig& c, FormatTag format) {
  ReadOptions r;
  r.vast = c.datasets.vast_columns;
  if (auto it = c.datasets.label_schemes.find(std::string(format_name(format)));
      it != c.datasets.label_schemes.end()) {
    r.scheme = it->second;
  }
  return r;
}

std::uint64_t sample_seed(const RunConfig& c) { return derive_seed(c.seed, "sample"); }

std::unique_ptr<LlmGateway> make_gateway(const RunConfig& c) {
  std::shared_ptr<CompletionBackend> backend;
  if (c.gateway.mock.enabled) {
    MockScript script;
    if (!c.gateway.mock.script.empty()) script = load_mock_script(c.gateway.mock.script);
    backend = std::make_shared<MockBackend>(std::move(script), c.gateway.mock.fixtures_dir);
  } else {
    backend = std::make_shared<HttpChatBackend>(c.gateway.endpoint, api_key_from_environment(),
                                                std::chrono::seconds(c.gateway.timeout_seconds));
  }
  GatewayOptions options;
  options.retry = c.gateway.retry;
  options.cache_dir = c.gateway.cache_dir;
  options.max_in_flight = c.gateway.max_in_flight;
  return std::make_unique<LlmGateway>(std::move(backend), std::move(options));
}

}  // namespace stancekit
