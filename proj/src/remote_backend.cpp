#include <openssl/evp.h>

#include <json.hpp>

#include "http_transport.hpp"
#include "stancekit/classifier.hpp"
#include "stancekit/error.hpp"

namespace stancekit {

using nlohmann::json;

namespace remote {

std::string encode_base64(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                          static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> decode_base64(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::ParseError, "base64 length is not a multiple of 4");
  }
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::ParseError, "invalid base64");
  // EVP_DecodeBlock counts padding bytes as output.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

namespace {

json error_body(ErrorCode code, const std::string& message) {
  return {{"error", {{"code", code_name(code)}, {"message", message}}}};
}

json probabilities_json(const Probabilities& p) { return json::array({p[0], p[1], p[2]}); }

}  // namespace

Reply handle(ClassifierBackend& backend, std::string_view endpoint, const std::string& body) {
  try {
    json request = json::parse(body);
    if (endpoint == "predict") {
      Prediction p = backend.predict(request.at("post").get<std::string>(),
                                     request.at("topic").get<std::string>());
      return {200, json{{"label", label_name(p.label)},
                        {"probabilities", probabilities_json(p.probabilities)}}
                       .dump()};
    }
    if (endpoint == "train") {
      std::vector<StanceExample> examples;
      std::size_t n = 0;
      for (const json& e : request.at("examples")) {
        StanceExample ex;
        ex.id = "remote:" + std::to_string(n++);
        ex.post = e.at("post").get<std::string>();
        ex.topic = e.at("topic").get<std::string>();
        ex.label = label_from_name(e.at("label").get<std::string>());
        ex.source = ExampleSource::Generated;
        validate(ex);
        examples.push_back(std::move(ex));
      }
      LabelSet class_set;
      for (const json& l : request.at("class_set")) {
        class_set.insert(label_from_name(l.get<std::string>()));
      }
      HyperOverrides overrides;
      if (request.contains("hyper")) {
        const json& h = request.at("hyper");
        if (h.contains("learning_rate")) overrides.learning_rate = h.at("learning_rate").get<double>();
        if (h.contains("epochs")) overrides.epochs = h.at("epochs").get<int>();
        if (h.contains("l2")) overrides.l2 = h.at("l2").get<double>();
        if (h.contains("batch_size")) overrides.batch_size = h.at("batch_size").get<int>();
        if (h.contains("seed")) overrides.seed = h.at("seed").get<std::uint64_t>();
      }
      TrainReport report = backend.train(examples, class_set, overrides);
      return {200, json{{"epoch_losses", report.epoch_losses},
                        {"initial_loss", report.initial_loss},
                        {"final_loss", report.final_loss},
                        {"epochs_run", report.epochs_run}}
                       .dump()};
    }
    if (endpoint == "snapshot") {
      const std::string op = request.at("op").get<std::string>();
      if (op == "take") {
        ClassifierSnapshot snap = backend.snapshot();
        return {200, json{{"backend_id", snap.backend_id},
                          {"state", encode_base64(snap.state)}}
                         .dump()};
      }
      if (op == "restore") {
        backend.restore({backend.backend_id(),
                         decode_base64(request.at("state").get<std::string>())});
        return {200, json{{"ok", true}}.dump()};
      }
      return {400, error_body(ErrorCode::InvalidArgument, "unknown snapshot op " + op).dump()};
    }
    return {404, error_body(ErrorCode::InvalidArgument,
                            "unknown endpoint " + std::string(endpoint))
                     .dump()};
  } catch (const Error& e) {
    int status = e.category() == ErrorCategory::Backend ? 500 : 400;
    return {status, error_body(e.code(), e.what()).dump()};
  } catch (const json::exception& e) {
    return {400, error_body(ErrorCode::ParseError, e.what()).dump()};
  }
}

}  // namespace remote

RemoteBackend::RemoteBackend(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string RemoteBackend::backend_id() const { return "remote:" + base_url_; }

std::string RemoteBackend::call(std::string_view endpoint, const std::string& body) const {
  detail::HttpReply reply;
  try {
    reply = detail::http_post_json(base_url_ + "/" + std::string(endpoint), body, {},
                                   timeout_);
  } catch (const TransientBackendError& e) {
    throw Error(ErrorCode::BackendError, e.what());
  }
  if (reply.status != 200) {
    std::string message = reply.body;
    ErrorCode code = ErrorCode::BackendError;
    try {
      json err = json::parse(reply.body).at("error");
      message = err.at("message").get<std::string>();
      std::string name = err.at("code").get<std::string>();
      for (ErrorCode candidate :
           {ErrorCode::EmptyTrainingSet, ErrorCode::LabelOutsideClassSet,
            ErrorCode::SnapshotBackendMismatch, ErrorCode::NotSupported,
            ErrorCode::InvalidArgument, ErrorCode::ParseError, ErrorCode::Diverged}) {
        if (name == code_name(candidate)) code = candidate;
      }
    } catch (const json::exception&) {
    }
    throw Error(code, "remote " + std::string(endpoint) + " (HTTP " +
                          std::to_string(reply.status) + "): " + message);
  }
  return reply.body;
}

namespace {

json parse_reply(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BackendError, std::string("remote reply is not JSON: ") + e.what());
  }
}

}  // namespace

Prediction RemoteBackend::predict(std::string_view post, std::string_view topic) const {
  json reply = parse_reply(call("predict", json{{"post", post}, {"topic", topic}}.dump()));
  try {
    Prediction p;
    p.label = label_from_name(reply.at("label").get<std::string>());
    auto probs = reply.at("probabilities").get<std::vector<double>>();
    if (probs.size() != kNumLabels) {
      throw Error(ErrorCode::BackendError, "remote predict returned wrong arity");
    }
    for (std::size_t c = 0; c < kNumLabels; ++c) p.probabilities[c] = probs[c];
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError, std::string("remote predict reply: ") + e.what());
  }
}

TrainReport RemoteBackend::train(std::span<const StanceExample> examples,
                                 const LabelSet& class_set,
                                 const HyperOverrides& overrides) {
  json items = json::array();
  for (const StanceExample& e : examples) {
    if (!e.label) {
      throw Error(ErrorCode::LabelOutsideClassSet, "training example " + e.id + " has no label");
    }
    items.push_back({{"post", e.post}, {"topic", e.topic}, {"label", label_name(*e.label)}});
  }
  json labels = json::array();
  for (StanceLabel l : class_set.labels()) labels.push_back(label_name(l));
  json hyper = json::object();
  if (overrides.learning_rate) hyper["learning_rate"] = *overrides.learning_rate;
  if (overrides.epochs) hyper["epochs"] = *overrides.epochs;
  if (overrides.l2) hyper["l2"] = *overrides.l2;
  if (overrides.batch_size) hyper["batch_size"] = *overrides.batch_size;
  if (overrides.seed) hyper["seed"] = *overrides.seed;

  json reply = parse_reply(call(
      "train", json{{"examples", items}, {"class_set", labels}, {"hyper", hyper}}.dump()));
  try {
    TrainReport report;
    report.epoch_losses = reply.at("epoch_losses").get<std::vector<double>>();
    report.initial_loss = reply.value("initial_loss", 0.0);
    report.final_loss = reply.value("final_loss", 0.0);
    report.epochs_run = reply.value("epochs_run", static_cast<int>(report.epoch_losses.size()));
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError, std::string("remote train reply: ") + e.what());
  }
}

ClassifierSnapshot RemoteBackend::snapshot() const {
  json reply = parse_reply(call("snapshot", json{{"op", "take"}}.dump()));
  try {
    return {backend_id(), remote::decode_base64(reply.at("state").get<std::string>())};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError, std::string("remote snapshot reply: ") + e.what());
  }
}

void RemoteBackend::restore(const ClassifierSnapshot& snapshot) {
  if (snapshot.backend_id != backend_id()) {
    throw Error(ErrorCode::SnapshotBackendMismatch,
                "snapshot from backend '" + snapshot.backend_id + "' cannot restore " +
                    backend_id());
  }
  call("snapshot",
       json{{"op", "restore"}, {"state", remote::encode_base64(snapshot.state)}}.dump());
}

}  // namespace stancekit
