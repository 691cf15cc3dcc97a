#include "stancekit/classifier.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "stancekit/error.hpp"
#include "stancekit/prompt_forge.hpp"

namespace stancekit {

namespace fs = std::filesystem;

Hyperparameters HyperOverrides::apply(Hyperparameters base) const {
  if (learning_rate) base.learning_rate = *learning_rate;
  if (epochs) base.epochs = *epochs;
  if (l2) base.l2 = *l2;
  if (batch_size) base.batch_size = *batch_size;
  if (seed) base.seed = *seed;
  validate(base);
  return base;
}

TrainReport ClassifierBackend::train(std::span<const StanceExample>, const LabelSet&,
                                     const HyperOverrides&) {
  throw Error(ErrorCode::NotSupported, "backend " + backend_id() + " is not trainable");
}

ClassifierSnapshot ClassifierBackend::snapshot() const {
  throw Error(ErrorCode::NotSupported, "backend " + backend_id() + " cannot snapshot");
}

void ClassifierBackend::restore(const ClassifierSnapshot&) {
  throw Error(ErrorCode::NotSupported, "backend " + backend_id() + " cannot restore");
}

// ---------------------------------------------------------------------------

LinearBackend::LinearBackend(LinearModel model) : model_(std::move(model)) {}

LinearBackend LinearBackend::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return LinearBackend(LinearModel::deserialize(bytes));
}

void LinearBackend::save(const fs::path& path) const {
  std::vector<std::uint8_t> bytes = model_.serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write model file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

Prediction LinearBackend::predict(std::string_view post, std::string_view topic) const {
  auto [label, probs] = model_.predict(post, topic);
  return {label, probs};
}

TrainReport LinearBackend::train(std::span<const StanceExample> examples,
                                 const LabelSet& class_set,
                                 const HyperOverrides& overrides) {
  const Hyperparameters saved = model_.hyper();
  model_.set_hyper(overrides.apply(saved));
  try {
    TrainReport report = model_.train(examples, class_set);
    model_.set_hyper(saved);
    return report;
  } catch (...) {
    model_.set_hyper(saved);
    throw;
  }
}

ClassifierSnapshot LinearBackend::snapshot() const {
  return {backend_id(), model_.serialize()};
}

void LinearBackend::restore(const ClassifierSnapshot& snapshot) {
  if (snapshot.backend_id != backend_id()) {
    throw Error(ErrorCode::SnapshotBackendMismatch,
                "snapshot from backend '" + snapshot.backend_id +
                    "' cannot restore " + backend_id());
  }
  model_ = LinearModel::deserialize(snapshot.state);
}

std::unique_ptr<ClassifierBackend> LinearBackend::clone() const {
  return std::make_unique<LinearBackend>(model_);
}

// ---------------------------------------------------------------------------

std::optional<StanceLabel> parse_llm_answer(std::string_view text) {
  const LabelScheme& scheme = LabelScheme::builtin("llm-answer");
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::string_view word = text.substr(start, i - start);
    while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.front()))) {
      word.remove_prefix(1);
    }
    while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back()))) {
      word.remove_suffix(1);
    }
    if (word.empty()) continue;
    if (auto label = scheme.lookup(word)) return label;
  }
  return std::nullopt;
}

StanceLabel llm_classify(std::string_view post, std::string_view topic,
                         LlmGateway& gateway, const LlmClassifyOptions& options) {
  LlmRequest request;
  request.model_name = options.model_name;
  request.prompt = render(TemplateId::StanceClassification,
                          {{"topic", std::string(topic)}, {"post", std::string(post)}});
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;

  std::string last;
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    last = gateway.complete(request, {.bypass_cache = attempt > 0}).text;
    if (auto label = parse_llm_answer(last)) return *label;
  }
  throw Error(ErrorCode::UnparseableAnswer,
              "no stance word in answer '" + last.substr(0, 80) + "'");
}

LlmBackend::LlmBackend(LlmGateway& gateway, LlmClassifyOptions options,
                       StanceLabel fallback)
    : gateway_(gateway), options_(std::move(options)), fallback_(fallback) {}

Prediction LlmBackend::predict(std::string_view post, std::string_view topic) const {
  StanceLabel label = fallback_;
  try {
    label = llm_classify(post, topic, gateway_, options_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableAnswer) throw;
    ++unparseable_;
  }
  Prediction out;
  out.label = label;
  out.probabilities[index_of(label)] = 1.0;
  return out;
}

}  // namespace stancekit
