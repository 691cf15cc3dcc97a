#include <doctest.h>

#include <algorithm>
#include <random>

#include "stancekit/error.hpp"
#include "stancekit/metrics.hpp"
#include "support.hpp"

using namespace stancekit;
using L = StanceLabel;

namespace {

Dataset labeled(const std::vector<std::pair<std::string, L>>& rows) {
  Dataset d(FormatTag::Vast);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.add({"e" + std::to_string(i), "post " + std::to_string(i), rows[i].first, rows[i].second,
           ExampleSource::Real});
  }
  return d;
}

PredictionSet predicted(const Dataset& d, const std::vector<L>& labels) {
  PredictionSet out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.push_back({d[i].id, d[i].label, labels[i], {}});
  }
  return out;
}

Dataset topics_only(const std::vector<std::string>& topics) {
  Dataset d;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    d.add({"t" + std::to_string(i), "p" + std::to_string(i), topics[i], L::Pro,
           ExampleSource::Real});
  }
  return d;
}

}  // namespace

TEST_CASE("hand-derived F1 case") {
  std::vector<L> gold = {L::Pro, L::Pro, L::Con, L::Con};
  std::vector<L> pred = {L::Pro, L::Con, L::Con, L::Con};
  ConfusionCounts c = confusion(gold, pred);
  CHECK(c.per_class[0].tp == 1);
  CHECK(c.per_class[0].fp == 0);
  CHECK(c.per_class[0].fn == 1);
  CHECK(c.per_class[1].tp == 2);
  CHECK(c.per_class[1].fp == 1);
  CHECK(c.per_class[1].fn == 0);

  PerClassScores s = f1_per_class(gold, pred);
  CHECK(s[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s[1].f1 == doctest::Approx(4.0 / 5.0).epsilon(1e-15));
  CHECK(std::abs(f1_macro(gold, pred) - 11.0 / 15.0) < 1e-12);
  CHECK(f1_macro(gold, pred, {L::Pro}) == s[0].f1);
}

TEST_CASE("degenerate scores") {
  std::vector<L> gold = {L::Pro, L::Con};
  CHECK(f1_macro(gold, gold) == 1.0);
  CHECK(f1_macro(gold, gold, LabelSet::all()) == doctest::Approx(2.0 / 3.0));  // Neutral 0/0 -> 0
  PerClassScores s = f1_per_class(gold, gold);
  CHECK(s[2].precision == 0.0);
  CHECK(s[2].recall == 0.0);
  CHECK(s[2].f1 == 0.0);

  std::vector<L> all_neutral = {L::Neutral, L::Neutral};
  CHECK(f1_macro(gold, all_neutral) == 0.0);

  std::vector<L> shorter = {L::Pro};
  try {
    f1_per_class(gold, shorter);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
  CHECK_THROWS_AS(f1_macro(gold, shorter), Error);
  CHECK_THROWS_AS(f1_per_class({}, {}), Error);
  CHECK_THROWS_AS(f1_macro(gold, gold, LabelSet{}), Error);
}

TEST_CASE("agreement with the brute-force oracle on random sets") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 50;
    std::vector<L> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = testing::random_label(rng);
      pred[i] = testing::random_label(rng);
    }
    testing::OracleScores o = testing::oracle_scores(gold, pred);
    PerClassScores s = f1_per_class(gold, pred);
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      CHECK(std::abs(s[c].precision - o.precision[c]) < 1e-12);
      CHECK(std::abs(s[c].recall - o.recall[c]) < 1e-12);
      CHECK(std::abs(s[c].f1 - o.f1[c]) < 1e-12);
      CHECK(s[c].f1 >= 0.0);
      CHECK(s[c].f1 <= 1.0);
    }
    for (const LabelSet& set :
         {LabelSet::pro_con(), LabelSet::all(), LabelSet{L::Neutral}}) {
      CHECK(std::abs(f1_macro(gold, pred, set) - testing::oracle_macro(gold, pred, set)) <
            1e-12);
    }

    ConfusionCounts c = confusion(gold, pred);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& k : c.per_class) {
      tp += k.tp;
      fp += k.fp;
      fn += k.fn;
    }
    CHECK(tp + fp == n);
    CHECK(tp + fn == n);

    // Joint shuffle leaves every score unchanged.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<L> g2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) {
      g2[i] = gold[perm[i]];
      p2[i] = pred[perm[i]];
    }
    PerClassScores s2 = f1_per_class(g2, p2);
    for (std::size_t k = 0; k < kNumLabels; ++k) CHECK(s2[k].f1 == s[k].f1);
    CHECK(f1_macro(g2, p2) == f1_macro(gold, pred));
  }
}

TEST_CASE("evaluate and per-topic report") {
  Dataset d = labeled({{"alpha", L::Pro},
                       {"alpha", L::Con},
                       {"beta  topic", L::Pro},
                       {"beta topic", L::Con},
                       {"gamma", L::Neutral},
                       {"gamma", L::Neutral}});
  std::vector<L> preds = {L::Pro, L::Pro, L::Pro, L::Con, L::Pro, L::Neutral};
  PredictionSet p = predicted(d, preds);

  TopicScores t = per_topic_report(d, p);
  REQUIRE(t.size() == 2);
  CHECK(t.at("alpha") ==
        doctest::Approx(f1_macro(std::vector<L>{L::Pro, L::Con}, std::vector<L>{L::Pro, L::Pro})));
  CHECK(t.at("beta topic") == 1.0);
  CHECK(t.count("gamma") == 0);

  EvalReport r = evaluate(d, p, true);
  CHECK(r.n_scored == 6);
  CHECK(r.n_unscored == 0);
  std::vector<L> gold;
  for (const auto& e : d) gold.push_back(*e.label);
  CHECK(r.macro_f1_pro_con == f1_macro(gold, preds));
  CHECK(r.macro_f1_all == f1_macro(gold, preds, LabelSet::all()));
  REQUIRE(r.per_topic.has_value());
  CHECK(*r.per_topic == t);
  CHECK_FALSE(evaluate(d, p).per_topic.has_value());

  SUBCASE("single topic equals the global score") {
    Dataset one = labeled({{"x", L::Pro}, {"x", L::Con}, {"x", L::Con}});
    std::vector<L> q = {L::Con, L::Con, L::Pro};
    TopicScores s = per_topic_report(one, predicted(one, q));
    REQUIRE(s.size() == 1);
    CHECK(s.at("x") == evaluate(one, predicted(one, q)).macro_f1_pro_con);
  }
  SUBCASE("missing prediction") {
    p.pop_back();
    try {
      evaluate(d, p);
      FAIL("expected MissingPrediction");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingPrediction);
      CHECK(std::string(e.what()).find("e5") != std::string::npos);
    }
  }
  SUBCASE("unlabeled examples are not scored") {
    Dataset u(FormatTag::Vast);
    u.add({"a", "p", "t", L::Pro, ExampleSource::Real});
    u.add({"b", "q", "t", std::nullopt, ExampleSource::Real});
    EvalReport ur = evaluate(u, predicted(u, {L::Pro, L::Con}));
    CHECK(ur.n_scored == 1);
    CHECK(ur.n_unscored == 1);
  }
}

TEST_CASE("dataset statistics") {
  SUBCASE("two identical topics") {
    DatasetStats s = dataset_stats(topics_only({"a b", "a b"}));
    CHECK(s.n_examples == 2);
    CHECK(s.n_unique_topics == 1);
    CHECK(s.n_topic_words == 4);
    CHECK(s.n_unique_topic_words == 2);
    CHECK(s.avg_words_per_topic == 2.0);
    CHECK(s.n_unique_posts == 2);
  }
  SUBCASE("empty") {
    DatasetStats s = dataset_stats(Dataset{});
    CHECK(s.n_examples == 0);
    CHECK(s.n_topic_words == 0);
    CHECK(s.avg_words_per_topic == 0.0);
  }
  SUBCASE("normalization and case") {
    Dataset d;
    d.add({"1", "same", "Gun  Control", L::Pro, ExampleSource::Real});
    d.add({"2", "same", " Gun Control ", L::Con, ExampleSource::Real});
    d.add({"3", "other", "gun control", std::nullopt, ExampleSource::Real});
    DatasetStats s = dataset_stats(d);
    CHECK(s.n_unique_posts == 2);
    CHECK(s.n_unique_topics == 2);  // case is kept for topics
    CHECK(s.n_unique_topic_words == 2);  // but not for topic words
    CHECK(s.n_topic_words == 6);
    CHECK(s.n_per_label == std::array<std::size_t, 3>{1, 1, 0});
    CHECK(s.n_unlabeled == 1);
  }
  SUBCASE("invariants on random datasets") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::string> topics;
      std::size_t n = 1 + rng() % 30;
      for (std::size_t i = 0; i < n; ++i) topics.push_back(testing::random_text(rng, 1, 4));
      DatasetStats s = dataset_stats(topics_only(topics));
      CHECK(s.n_unique_topic_words <= s.n_topic_words);
      CHECK(s.n_unique_topics <= s.n_examples);
      CHECK(s.n_unique_posts <= s.n_examples);
      CHECK(s.avg_words_per_topic ==
            static_cast<double>(s.n_topic_words) / static_cast<double>(s.n_examples));
    }
  }
}

TEST_CASE("top topics") {
  Dataset d = topics_only({"b", "a", "c", "b", "a", "b", "d"});
  using V = std::vector<std::pair<std::string, std::size_t>>;
  CHECK(top_topics(d, 2) == V{{"b", 3}, {"a", 2}});
  CHECK(top_topics(d, 10) == V{{"b", 3}, {"a", 2}, {"c", 1}, {"d", 1}});
  CHECK(top_topics(topics_only({"z", "y", "x"}), 3) == V{{"x", 1}, {"y", 1}, {"z", 1}});
  CHECK_THROWS_AS(top_topics(d, 0), Error);
}
