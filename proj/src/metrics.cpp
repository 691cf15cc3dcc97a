#include "stancekit/metrics.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "stancekit/error.hpp"

namespace stancekit {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_lengths(std::span<const StanceLabel> gold, std::span<const StanceLabel> pred) {
  if (gold.size() != pred.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "gold has " + std::to_string(gold.size()) + " labels, predictions " +
                    std::to_string(pred.size()));
  }
}

struct Aligned {
  std::vector<StanceLabel> gold;
  std::vector<StanceLabel> pred;
  std::vector<std::string> topics;
  std::size_t unscored = 0;
};

Aligned align(const Dataset& test, const PredictionSet& predictions) {
  std::unordered_map<std::string_view, const PredictionRecord*> by_id;
  by_id.reserve(predictions.size());
  for (const PredictionRecord& r : predictions) by_id.emplace(r.example_id, &r);

  Aligned out;
  for (const StanceExample& ex : test) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::MissingPrediction, "no prediction for example " + ex.id);
    }
    if (!ex.label) {
      ++out.unscored;
      continue;
    }
    out.gold.push_back(*ex.label);
    out.pred.push_back(it->second->predicted);
    out.topics.push_back(normalize_topic(ex.topic));
  }
  return out;
}

}  // namespace

ConfusionCounts confusion(std::span<const StanceLabel> gold,
                          std::span<const StanceLabel> pred) {
  check_lengths(gold, pred);
  ConfusionCounts counts;
  counts.n = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::size_t g = index_of(gold[i]);
    std::size_t p = index_of(pred[i]);
    if (g == p) {
      ++counts.per_class[g].tp;
    } else {
      ++counts.per_class[p].fp;
      ++counts.per_class[g].fn;
    }
  }
  return counts;
}

PerClassScores f1_per_class(std::span<const StanceLabel> gold,
                            std::span<const StanceLabel> pred) {
  check_lengths(gold, pred);
  if (gold.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to score");
  ConfusionCounts counts = confusion(gold, pred);
  PerClassScores scores;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const ClassCounts& k = counts.per_class[c];
    ClassScores& s = scores[c];
    s.precision = ratio(k.tp, k.tp + k.fp);
    s.recall = ratio(k.tp, k.tp + k.fn);
    double pr = s.precision + s.recall;
    s.f1 = pr == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / pr;
  }
  return scores;
}

double f1_macro(std::span<const StanceLabel> gold, std::span<const StanceLabel> pred,
                const LabelSet& class_set) {
  if (class_set.empty()) throw Error(ErrorCode::InvalidArgument, "empty class set");
  PerClassScores scores = f1_per_class(gold, pred);
  double sum = 0.0;
  for (StanceLabel c : class_set.labels()) sum += scores[index_of(c)].f1;
  return sum / static_cast<double>(class_set.size());
}

TopicScores per_topic_report(const Dataset& test, const PredictionSet& predictions) {
  Aligned a = align(test, predictions);
  std::map<std::string, std::pair<std::vector<StanceLabel>, std::vector<StanceLabel>>> groups;
  for (std::size_t i = 0; i < a.gold.size(); ++i) {
    auto& [g, p] = groups[a.topics[i]];
    g.push_back(a.gold[i]);
    p.push_back(a.pred[i]);
  }
  TopicScores out;
  for (const auto& [topic, pair] : groups) {
    const auto& [g, p] = pair;
    bool has_pro_con = std::any_of(g.begin(), g.end(), [](StanceLabel l) {
      return l == StanceLabel::Pro || l == StanceLabel::Con;
    });
    if (!has_pro_con) continue;
    out[topic] = f1_macro(g, p);
  }
  return out;
}

EvalReport evaluate(const Dataset& test, const PredictionSet& predictions, bool per_topic) {
  Aligned a = align(test, predictions);
  EvalReport report;
  report.n_scored = a.gold.size();
  report.n_unscored = a.unscored;
  if (!a.gold.empty()) {
    report.per_class = f1_per_class(a.gold, a.pred);
    report.macro_f1_pro_con = f1_macro(a.gold, a.pred, LabelSet::pro_con());
    report.macro_f1_all = f1_macro(a.gold, a.pred, LabelSet::all());
  }
  if (per_topic) report.per_topic = per_topic_report(test, predictions);
  return report;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats stats;
  std::set<std::string_view> posts;
  std::set<std::string> topics;
  std::set<std::string> words;
  for (const StanceExample& ex : dataset) {
    ++stats.n_examples;
    if (ex.label) {
      ++stats.n_per_label[index_of(*ex.label)];
    } else {
      ++stats.n_unlabeled;
    }
    posts.insert(ex.post);
    std::string topic = normalize_topic(ex.topic);
    std::size_t start = 0;
    while (start < topic.size()) {
      std::size_t end = topic.find(' ', start);
      if (end == std::string::npos) end = topic.size();
      ++stats.n_topic_words;
      words.insert(to_lower_ascii(std::string_view(topic).substr(start, end - start)));
      start = end + 1;
    }
    topics.insert(std::move(topic));
  }
  stats.n_unique_posts = posts.size();
  stats.n_unique_topics = topics.size();
  stats.n_unique_topic_words = words.size();
  stats.avg_words_per_topic = ratio(stats.n_topic_words, stats.n_examples);
  return stats;
}

std::vector<std::pair<std::string, std::size_t>> top_topics(const Dataset& dataset,
                                                             std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "top_topics needs n >= 1");
  std::map<std::string, std::size_t> freq;
  for (const StanceExample& ex : dataset) ++freq[normalize_topic(ex.topic)];
  std::vector<std::pair<std::string, std::size_t>> out(freq.begin(), freq.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace stancekit
