#include "stancekit/adapt.hpp"

#include <memory>
#include <random>

#include "stancekit/error.hpp"
#include "stancekit/parallel.hpp"
#include "stancekit/random.hpp"

namespace stancekit {

std::string_view grouping_name(Grouping grouping) {
  return grouping == Grouping::PerTopic ? "per_topic" : "per_input";
}

Grouping grouping_from_name(std::string_view name) {
  if (name == "per_topic") return Grouping::PerTopic;
  if (name == "per_input") return Grouping::PerInput;
  throw Error(ErrorCode::InvalidArgument,
              "grouping must be per_topic or per_input, got '" + std::string(name) + "'");
}

namespace {

struct Episode {
  std::string topic;
  std::string seed_key;
  std::vector<std::size_t> members;  // indices into the test set
};

std::vector<Episode> plan_episodes(const Dataset& test, Grouping grouping) {
  std::vector<Episode> episodes;
  if (grouping == Grouping::PerInput) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      // Seeded by topic, not id, so a one-example set matches per_topic exactly.
      std::string topic = normalize_topic(test[i].topic);
      episodes.push_back({topic, "episode:" + topic, {i}});
    }
    return episodes;
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < test.size(); ++i) {
    groups[normalize_topic(test[i].topic)].push_back(i);
  }
  for (auto& [topic, members] : groups) {
    episodes.push_back({topic, "episode:" + topic, std::move(members)});
  }
  return episodes;
}

PredictionRecord record_for(const StanceExample& ex, const Prediction& p) {
  return {ex.id, ex.label, p.label, p.probabilities};
}

}  // namespace

AdaptResult run_dymoadapt(ClassifierBackend& base, const Dataset& test,
                          LlmGateway& gateway, const DatagenConfig& datagen,
                          const AdaptConfig& config) {
  const Capabilities caps = base.capabilities();
  if (!caps.trainable || !caps.snapshotable) {
    throw Error(ErrorCode::NotSupported,
                "backend " + base.backend_id() + " must be trainable and snapshotable");
  }
  if (test.empty()) throw Error(ErrorCode::InvalidArgument, "test set is empty");
  if (config.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");

  const std::vector<Episode> episodes = plan_episodes(test, config.grouping);
  std::vector<std::size_t> order(episodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (config.episode_order_seed) {
    std::mt19937_64 rng(*config.episode_order_seed);
    deterministic_shuffle(std::span<std::size_t>(order), rng);
  }

  const ClassifierSnapshot origin = base.snapshot();
  const bool cloneable = base.clone() != nullptr;
  const std::size_t workers = cloneable ? config.workers : 1;
  const LabelSet class_set = label_set_for(config.label_mode);

  std::vector<EpisodeLog> logs(episodes.size());
  std::vector<std::optional<PredictionRecord>> records(test.size());

  auto run_episode = [&](std::size_t slot) {
    const std::size_t e = order[slot];
    const Episode& episode = episodes[e];
    std::unique_ptr<ClassifierBackend> copy = cloneable ? base.clone() : nullptr;
    ClassifierBackend& working = copy ? *copy : base;
    working.restore(origin);

    const StanceExample& exemplar = test[episode.members.front()];
    AdaptationSet set = generate_adaptation_set(episode.topic, exemplar, config.k,
                                                config.label_mode, gateway, datagen);
    EpisodeLog& log = logs[e];
    log.topic = episode.topic;
    log.episode = e;
    log.generated_count = set.examples.size();
    log.dropped_count = set.dropped;
    log.partial = set.partial();

    if (!set.examples.empty()) {
      HyperOverrides hyper = config.finetune;
      if (!hyper.seed) hyper.seed = derive_seed(config.seed, episode.seed_key);
      TrainReport report = working.train(set.examples, class_set, hyper);
      log.adapted = true;
      log.epochs_run = report.epochs_run;
      log.pre_train_loss = report.initial_loss;
      log.post_train_loss = report.final_loss;
    }
    for (std::size_t i : episode.members) {
      records[i] = record_for(test[i], working.predict(test[i].post, test[i].topic));
    }
    log.examples_predicted = episode.members.size();
    if (!copy) base.restore(origin);
  };
  parallel_for(order.size(), workers, run_episode);

  if (base.snapshot().state != origin.state) {
    throw Error(ErrorCode::BackendError,
                "base model state changed during adaptation; restore is broken");
  }

  AdaptResult result;
  result.episodes = std::move(logs);
  result.predictions.reserve(test.size());
  for (auto& r : records) result.predictions.push_back(std::move(*r));
  return result;
}

PredictionSet run_baseline(const ClassifierBackend& model, const Dataset& test) {
  PredictionSet out;
  out.reserve(test.size());
  for (const StanceExample& ex : test) {
    out.push_back(record_for(ex, model.predict(ex.post, ex.topic)));
  }
  return out;
}

}  // namespace stancekit
