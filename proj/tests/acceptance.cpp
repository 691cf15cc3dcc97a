// Acceptance suite: one line per criterion, PASS / FAIL / SKIP, then a
// summary. Exit status is non-zero when any criterion fails.
//
// Criterion 9 needs the published MGT-VAST train file:
//   STANCEKIT_MGT_VAST_TRAIN   path to the file (criterion skipped when unset)
//   STANCEKIT_MGT_VAST_FORMAT  vast | semeval | mgt (default vast)
//   STANCEKIT_MGT_VAST_CONFIG  optional run config, e.g. for column names

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cli_runner.hpp"
#include "stancekit/adapt.hpp"
#include "stancekit/datagen.hpp"
#include "stancekit/error.hpp"
#include "stancekit/linear_model.hpp"
#include "stancekit/metrics.hpp"
#include "stancekit/prompt_forge.hpp"
#include "support.hpp"

using namespace stancekit;
using namespace stancekit::testing;
using L = StanceLabel;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome pass(std::string d) { return {Verdict::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::Fail, std::move(d)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240101);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 50;
    std::vector<L> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = random_label(rng);
      pred[i] = random_label(rng);
    }
    OracleScores o = oracle_scores(gold, pred);
    PerClassScores s = f1_per_class(gold, pred);
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      worst = std::max({worst, std::abs(s[c].precision - o.precision[c]),
                        std::abs(s[c].recall - o.recall[c]), std::abs(s[c].f1 - o.f1[c])});
    }
    for (const LabelSet& set : {LabelSet::pro_con(), LabelSet::all()}) {
      worst = std::max(worst, std::abs(f1_macro(gold, pred, set) - oracle_macro(gold, pred, set)));
    }
  }
  std::vector<L> gold = {L::Pro, L::Pro, L::Con, L::Con};
  std::vector<L> pred = {L::Pro, L::Con, L::Con, L::Con};
  double hand = f1_macro(gold, pred);
  double elapsed = seconds_since(t0);
  std::string detail = "max |diff| " + fmt("%.3g", worst) + ", hand case " + fmt("%.12f", hand) +
                       ", " + fmt("%.2f s", elapsed);
  if (worst >= 1e-12) return fail(detail);
  if (std::abs(hand - 11.0 / 15.0) >= 1e-12) return fail(detail);
  if (elapsed >= 5.0) return fail(detail + " (limit 5 s)");
  return pass(detail);
}

LinearModel random_model(std::mt19937_64& rng, const FeatureVector& x, double l2) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Hyperparameters h;
  h.l2 = l2;
  LinearModel m(h);
  for (L c : kAllLabels) {
    m.set_bias(c, normal(rng));
    for (const auto& e : x) m.set_weight(c, e.index, normal(rng));
  }
  return m;
}

Outcome gradient_check() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    FeatureVector x = featurize(random_text(rng, 1, 25), random_text(rng, 1, 4));
    LinearModel m = random_model(rng, x, trial % 2 ? 1e-2 : 0.0);
    GradCheckOptions o;
    o.seed = static_cast<std::uint64_t>(trial);
    worst = std::max(worst, grad_check(m, {x, random_label(rng)}, o));
  }
  FeatureVector x = featurize("the new plan sounds splendid", "city plan");
  LinearModel m = random_model(rng, x, 1e-3);
  GradCheckOptions flipped;
  flipped.gradient = [](const LinearModel& model, const LabeledFeatures& e, const LabelSet& s) {
    Gradient g = model.data_gradient(e, s);
    for (auto& row : g.weights) {
      for (auto& [i, v] : row) v = -v;
    }
    for (double& b : g.bias) b = -b;
    return g;
  };
  double control = grad_check(m, {x, L::Con}, flipped);
  double elapsed = seconds_since(t0);
  std::string detail = "max rel err " + fmt("%.3g", worst) + ", sign-flipped " +
                       fmt("%.3g", control) + ", " + fmt("%.2f s", elapsed);
  if (worst >= 1e-4 || control <= 1e-1) return fail(detail);
  if (elapsed >= 10.0) return fail(detail + " (limit 10 s)");
  return pass(detail);
}

Outcome trainability() {
  auto t0 = std::chrono::steady_clock::now();
  auto data = separable_corpus(200, 314);
  Hyperparameters h;
  h.epochs = 50;
  LinearModel m(h);
  TrainReport r = m.train(data, LabelSet::all());
  std::size_t correct = 0;
  for (const auto& e : data) correct += m.predict(e.post, e.topic).first == *e.label;
  double acc = static_cast<double>(correct) / static_cast<double>(data.size());
  double elapsed = seconds_since(t0);
  std::string detail = "train acc " + fmt("%.3f", acc) + ", loss epoch1 " +
                       fmt("%.4f", r.epoch_losses.front()) + " -> epoch50 " +
                       fmt("%.4f", r.epoch_losses.back()) + ", " + fmt("%.2f s", elapsed);
  if (r.epoch_losses.size() != 50) return fail(detail + " (epochs run != 50)");
  if (acc < 0.95 || !(r.epoch_losses.back() < r.epoch_losses.front())) return fail(detail);
  if (elapsed >= 30.0) return fail(detail + " (limit 30 s)");
  return pass(detail);
}

// Wraps LinearBackend and counts the labels of every training batch.
class CountingBackend : public LinearBackend {
 public:
  using LinearBackend::LinearBackend;
  TrainReport train(std::span<const StanceExample> examples, const LabelSet& class_set,
                    const HyperOverrides& overrides) override {
    std::array<std::size_t, kNumLabels> n{};
    for (const auto& e : examples) ++n[index_of(*e.label)];
    batches.push_back(n);
    return LinearBackend::train(examples, class_set, overrides);
  }
  std::unique_ptr<ClassifierBackend> clone() const override { return nullptr; }
  std::vector<std::array<std::size_t, kNumLabels>> batches;
};

Outcome structural_fidelity() {
  Dataset test = scenario_test_set(4, 41);
  CountingBackend base;
  base.train(separable_corpus(30, 2), LabelSet::all(), {});
  base.batches.clear();
  const auto before = base.model().serialize();

  AdaptConfig cfg;  // k = 3, two-mode, per topic
  cfg.seed = 5;
  DatagenConfig dg;
  auto gw = gateway_for(scenario_llm());
  AdaptResult r = run_dymoadapt(base, test, *gw, dg, cfg);

  std::string counts;
  for (const EpisodeLog& e : r.episodes) {
    counts += (counts.empty() ? "" : ",") + std::to_string(e.generated_count);
    if (e.generated_count != 6) return fail("generated_count " + counts);
  }
  if (r.episodes.size() != 3) return fail("expected 3 episodes");
  for (const auto& n : base.batches) {
    if (n[0] != 3 || n[1] != 3 || n[2] != 0) return fail("episode batch is not 3 Pro + 3 Con");
  }
  if (base.model().serialize() != before) return fail("base state changed");

  for (std::uint64_t s = 1; s <= 5; ++s) {
    AdaptConfig shuffled = cfg;
    shuffled.episode_order_seed = s;
    AdaptResult p = run_dymoadapt(base, test, *gw, dg, shuffled);
    if (p.predictions != r.predictions) {
      return fail("order seed " + std::to_string(s) + " changed predictions");
    }
  }
  if (base.model().serialize() != before) return fail("base state changed after reruns");
  return pass("3 episodes x 6 (3 Pro, 3 Con), base bytes identical, 5 orderings agree");
}

double macro_of(const Dataset& test, const PredictionSet& p) {
  return evaluate(test, p).macro_f1_pro_con;
}

Outcome adaptation_benefit() {
  auto t0 = std::chrono::steady_clock::now();
  Dataset test = scenario_test_set(20, 55);
  auto gw = gateway_for(scenario_llm());
  DatagenConfig dg;
  AdaptConfig cfg;
  cfg.seed = 9;

  LinearBackend zero;
  double base0 = macro_of(test, run_baseline(zero, test));
  double adapt0 = macro_of(test, run_dymoadapt(zero, test, *gw, dg, cfg).predictions);

  // A base model trained on unrelated data; the scenario's cues are unseen.
  LinearBackend warm;
  warm.train(separable_corpus(100, 3), LabelSet::all(), {});
  double base1 = macro_of(test, run_baseline(warm, test));
  double adapt1 = macro_of(test, run_dymoadapt(warm, test, *gw, dg, cfg).predictions);

  double elapsed = seconds_since(t0);
  std::string detail = "zero init " + fmt("%.3f", base0) + " -> " + fmt("%.3f", adapt0) +
                       ", pretrained " + fmt("%.3f", base1) + " -> " + fmt("%.3f", adapt1) +
                       ", " + fmt("%.2f s", elapsed);
  if (!(adapt0 > base0) || !(adapt1 >= base1)) return fail(detail);
  if (elapsed >= 60.0) return fail(detail + " (limit 60 s)");
  return pass(detail);
}

Outcome prompt_bit_exactness() {
  const std::filesystem::path dir = std::filesystem::path(STANCEKIT_TEST_FIXTURES) / "prompts";
  auto sets = nlohmann::json::parse(slurp(dir / "bindings.json"));
  int compared = 0, equal = 0;
  for (TemplateId id : {TemplateId::TopicGeneration, TemplateId::PostGeneration,
                        TemplateId::StanceClassification}) {
    for (const auto& [name, set] : sets.items()) {
      Bindings b;
      for (const std::string& key : placeholders(id)) b[key] = set.at(key).get<std::string>();
      std::string expected = slurp(dir / (std::string(template_name(id)) + "." + name + ".txt"));
      ++compared;
      if (render(id, b).text == expected) ++equal;
    }
  }
  std::string detail = std::to_string(equal) + "/" + std::to_string(compared) + " fixtures equal";
  if (compared != 9 || equal != compared) return fail(detail);
  return pass(detail);
}

// Answers topic-generation prompts from a per-post script; the n-th call for
// a post gets replies[n], the last one repeating.
std::shared_ptr<FunctionBackend> topic_mock(std::map<std::string, std::vector<std::string>> script) {
  auto per_post = std::make_shared<std::map<std::string, std::size_t>>();
  auto mu = std::make_shared<std::mutex>();
  return std::make_shared<FunctionBackend>(
      [script, per_post, mu](const LlmRequest& r, std::size_t) -> std::string {
        const std::string& p = r.prompt.text;
        auto open = p.rfind("post: ```");
        std::string post = p.substr(open + 9, p.size() - open - 12);
        auto it = script.find(post);
        if (it == script.end()) return "no idea";
        std::lock_guard lock(*mu);
        std::size_t n = (*per_post)[post]++;
        return it->second[std::min(n, it->second.size() - 1)];
      });
}

Outcome robust_parsing() {
  DatagenConfig cfg;
  cfg.parse_retries = 2;
  auto gw = gateway_for(topic_mock({
      {"prose post", {"Sure, here they are:\n{\"school choice\": \"agree\"}\nHope it helps."}},
      {"retry post", {"{\"school choice\": agree", "{\"public funding\": \"disagree\"}"}},
      {"broken post", {"I cannot produce JSON today."}},
  }));

  TopicParse a = generate_topics_for_post("prose post", "a", *gw, cfg);
  if (a.proposals.size() != 1 || a.counts.llm_retries != 0) return fail("(a) prose-wrapped");
  TopicParse b = generate_topics_for_post("retry post", "b", *gw, cfg);
  if (b.proposals.size() != 1 || b.counts.llm_retries != 1) {
    return fail("(b) retries " + std::to_string(b.counts.llm_retries));
  }
  try {
    generate_topics_for_post("broken post", "c", *gw, cfg);
    return fail("(c) no MalformedResponse");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedResponse) return fail(std::string("(c) ") + e.what());
  }

  // The whole pipeline completes around the broken post.
  auto gw2 = gateway_for(topic_mock({
      {"prose post", {"Sure:\n{\"school choice\": \"agree\"}"}},
      {"retry post", {"{oops", "{\"public funding\": \"disagree\"}"}},
      {"broken post", {"still not json"}},
  }));
  Dataset posts(FormatTag::Vast);
  int i = 0;
  for (const char* p : {"prose post", "broken post", "retry post"}) {
    posts.add({"p" + std::to_string(++i), p, "posts", L::Pro, ExampleSource::Real});
  }
  MgtBuild built = build_mgt_dataset(posts, *gw2, cfg);
  if (built.dataset.size() != 2 || built.report.posts_failed != 1) {
    return fail("pipeline kept " + std::to_string(built.dataset.size()) + " examples");
  }
  return pass("(a) accepted, (b) accepted with 1 retry, (c) MalformedResponse; pipeline kept 2 "
              "of 3 posts");
}

Outcome cli_determinism() {
  const std::string fix = std::string(STANCEKIT_TEST_FIXTURES) + "/cli/";
  TempDir dir("acc");
  std::string model = (dir / "base.bin").string();
  CliResult t = run_cli({"train", "--dataset", fix + "train.csv", "--model-out", model,
                         "--classes", "pro,con"});
  if (t.status != 0) return fail("train: " + t.err);
  for (const char* tag : {"a", "b"}) {
    CliResult r = run_cli({"--mock", fix + "mock.json", "--seed", "2024", "--workers", "2",
                           "adapt", "--model", model, "--dataset", fix + "test.csv", "--k", "3",
                           "--predictions-out", (dir / (std::string(tag) + ".jsonl")).string(),
                           "--episodes-out", (dir / (std::string(tag) + ".json")).string()});
    if (r.status != 0) return fail(std::string("adapt run ") + tag + ": " + r.err);
  }
  std::string pa = slurp(dir / "a.jsonl"), pb = slurp(dir / "b.jsonl");
  std::string ea = slurp(dir / "a.json"), eb = slurp(dir / "b.json");
  if (pa.empty() || ea.empty()) return fail("empty outputs");
  if (pa != pb) return fail("prediction files differ");
  if (ea != eb) return fail("episode logs differ");
  return pass("predictions (" + std::to_string(pa.size()) + " B) and episode logs (" +
              std::to_string(ea.size()) + " B) identical");
}

Outcome published_statistics() {
  const char* path = std::getenv("STANCEKIT_MGT_VAST_TRAIN");
  if (!path || !*path) return {Verdict::Skip, "STANCEKIT_MGT_VAST_TRAIN not set"};
  if (!std::filesystem::exists(path)) {
    return {Verdict::Skip, std::string("file not found: ") + path};
  }
  const char* format = std::getenv("STANCEKIT_MGT_VAST_FORMAT");
  const char* config = std::getenv("STANCEKIT_MGT_VAST_CONFIG");
  std::vector<std::string> args;
  if (config && *config) args = {"--config", config};
  for (const std::string& a : {std::string("stats"), std::string("--dataset"), std::string(path),
                               std::string("--format"),
                               std::string(format && *format ? format : "vast"),
                               std::string("--top"), std::string("2"), std::string("--report"),
                               (std::filesystem::temp_directory_path() / "stancekit-ac9.json")
                                   .string()}) {
    args.push_back(a);
  }
  CliResult r = run_cli(args);
  if (r.status != 0) return fail("stats: " + r.err);
  auto s = nlohmann::json::parse(
      slurp(std::filesystem::temp_directory_path() / "stancekit-ac9.json"));
  struct Field {
    const char* name;
    std::size_t got;
    std::size_t want;
  };
  std::vector<Field> fields = {
      {"examples", s["n_examples"].get<std::size_t>(), 4986},
      {"agree", s["n_per_label"]["pro"].get<std::size_t>(), 2516},
      {"disagree", s["n_per_label"]["con"].get<std::size_t>(), 2470},
      {"unique posts", s["n_unique_posts"].get<std::size_t>(), 1233},
      {"unique topics", s["n_unique_topics"].get<std::size_t>(), 4877},
      {"topic words", s["n_topic_words"].get<std::size_t>(), 17655},
      {"unique topic words", s["n_unique_topic_words"].get<std::size_t>(), 5890},
  };
  std::string mismatches;
  for (const Field& f : fields) {
    if (f.got != f.want) {
      mismatches += std::string(mismatches.empty() ? "" : "; ") + f.name + " " +
                    std::to_string(f.got) + " != " + std::to_string(f.want);
    }
  }
  const auto& top = s["top_topics"];
  auto head_is = [&](std::size_t i, const char* topic, std::size_t n) {
    return top.size() > i && top[i]["topic"] == topic && top[i]["frequency"] == n;
  };
  if (!head_is(0, "Charter schools", 6) || !head_is(1, "dual citizenship", 5)) {
    mismatches += std::string(mismatches.empty() ? "" : "; ") + "top topics " + top.dump();
  }
  if (!mismatches.empty()) return fail(mismatches);
  return pass("7 integer fields and top-2 topics match");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", metric_oracle},
      {2, "gradient correctness", gradient_check},
      {3, "trainability", trainability},
      {4, "adaptation structure (k=3, 2k examples, restore, order)", structural_fidelity},
      {5, "adaptation benefit on constructed scenario", adaptation_benefit},
      {6, "prompt bit-exactness", prompt_bit_exactness},
      {7, "robust topic-reply parsing", robust_parsing},
      {8, "CLI adapt determinism", cli_determinism},
      {9, "published MGT-VAST statistics", published_statistics},
  };
  int failed = 0, passed = 0, skipped = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    std::printf("%s AC%d %s: %s\n", tag, c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    (o.verdict == Verdict::Pass ? passed : o.verdict == Verdict::Fail ? failed : skipped)++;
  }
  std::printf("acceptance: %d passed, %d failed, %d skipped\n", passed, failed, skipped);
  return failed == 0 ? 0 : 1;
}
