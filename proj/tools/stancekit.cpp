// stancekit command-line entry point. Exit status: 0 ok, 1 usage, 2 data,
// 3 backend. Failures print one line to stderr:
//   error: category=<usage|data|backend> code=<Code> message=<text>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stancekit/adapt.hpp"
#include "stancekit/classifier.hpp"
#include "stancekit/config.hpp"
#include "stancekit/core.hpp"
#include "stancekit/datagen.hpp"
#include "stancekit/dataset_io.hpp"
#include "stancekit/error.hpp"
#include "stancekit/metrics.hpp"

using namespace stancekit;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string mock_script;
  std::string mock_fixtures;
  std::string cache_dir;
  std::optional<std::size_t> sample;
  std::optional<std::size_t> workers;
};

struct DatasetArgs {
  std::string path;
  std::string format = "vast";
  std::string scheme;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& d, bool required = true) {
  cmd->add_option("--dataset", d.path, "Dataset file")->required(required);
  cmd->add_option("--format", d.format, "vast, semeval or mgt")
      ->check(CLI::IsMember({"vast", "semeval", "mgt"}));
  cmd->add_option("--scheme", d.scheme, "Label scheme override");
}

RunConfig build_config(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  if (!c.mock_script.empty()) {
    config.gateway.mock.enabled = true;
    config.gateway.mock.script = c.mock_script;
  }
  if (!c.mock_fixtures.empty()) {
    config.gateway.mock.enabled = true;
    config.gateway.mock.fixtures_dir = c.mock_fixtures;
  }
  if (!c.cache_dir.empty()) config.gateway.cache_dir = c.cache_dir;
  if (c.workers) {
    config.datagen.workers = *c.workers;
    config.adapt.workers = *c.workers;
  }
  validate(config);
  return config;
}

Dataset load(const RunConfig& config, const Common& common, const DatasetArgs& args) {
  FormatTag format = format_from_name(args.format);
  ReadOptions options = read_options(config, format);
  if (!args.scheme.empty()) {
    LabelScheme::builtin(args.scheme);  // reject unknown names early
    options.scheme = args.scheme;
  }
  Dataset dataset = read_dataset(args.path, format, options);
  if (common.sample) dataset = sample_dataset(dataset, *common.sample, sample_seed(config));
  return dataset;
}

std::unique_ptr<ClassifierBackend> load_model(const std::string& spec) {
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    return std::make_unique<RemoteBackend>(spec);
  }
  return std::make_unique<LinearBackend>(LinearBackend::load(spec));
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) return;
  if (path == "-") {
    std::cout << content;
  } else {
    write_text(path, content);
  }
}

void print_eval(const EvalReport& report, std::string_view model_name,
                const std::string& report_path) {
  std::cout << render_eval_table(report, model_name);
  write_or_print(report_path, eval_report_json(report));
}

int report_error(ErrorCategory category, std::string_view code, const std::string& message) {
  std::cerr << "error: category=" << category_name(category) << " code=" << code
            << " message=" << message << "\n";
  return exit_status(category);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stancekit: stance detection with test-time adaptation"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config_path, "JSON run configuration");
  app.add_option("--seed", common.seed, "Global seed (overrides config)");
  app.add_option("--mock", common.mock_script, "Use the mock LLM with this script");
  app.add_option("--mock-fixtures", common.mock_fixtures,
                 "Use the mock LLM with <digest>.txt fixtures from this directory");
  app.add_option("--cache-dir", common.cache_dir, "LLM response cache directory");
  app.add_option("--sample", common.sample, "Evaluate a seeded sample of n examples")
      ->check(CLI::PositiveNumber);
  app.add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);

  // gen-topics
  auto* gen = app.add_subcommand("gen-topics", "Build a multi-topic dataset from posts");
  DatasetArgs gen_in;
  std::string gen_out, gen_report;
  bool strict_length = false;
  gen->add_option("--input", gen_in.path, "Posts (any supported format)")->required();
  gen->add_option("--format", gen_in.format, "Format of --input")
      ->check(CLI::IsMember({"vast", "semeval", "mgt"}));
  gen->add_option("--scheme", gen_in.scheme, "Label scheme override for --input");
  gen->add_option("--out", gen_out, "Output JSONL")->required();
  gen->add_option("--report", gen_report, "GenerationReport JSON ('-' for stdout)");
  gen->add_flag("--strict-length", strict_length, "Reject topics outside 2-4 words");

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset statistics and most frequent topics");
  DatasetArgs stats_in;
  std::size_t stats_top = 10;
  std::string stats_report;
  add_dataset_options(stats, stats_in);
  stats->add_option("--top", stats_top, "Number of top topics")->check(CLI::PositiveNumber);
  stats->add_option("--report", stats_report, "Statistics JSON ('-' for stdout)");

  // train
  auto* train = app.add_subcommand("train", "Train the native linear classifier");
  DatasetArgs train_in;
  std::string model_out, classes = "pro,con,neutral";
  std::optional<int> train_epochs;
  std::optional<double> train_lr;
  train->add_option("--model-out", model_out, "Model file to write")->required();
  add_dataset_options(train, train_in);
  train->add_option("--classes", classes, "Class set, e.g. pro,con");
  train->add_option("--epochs", train_epochs, "Override classifier.epochs");
  train->add_option("--lr", train_lr, "Override classifier.learning_rate");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a trained model without adaptation");
  DatasetArgs eval_in;
  std::string eval_model, eval_report, eval_preds;
  bool eval_per_topic = false;
  eval->add_option("--model", eval_model, "Model file or remote URL")->required();
  add_dataset_options(eval, eval_in);
  eval->add_flag("--per-topic", eval_per_topic, "Include per-topic scores");
  eval->add_option("--report", eval_report, "EvalReport JSON ('-' for stdout)");
  eval->add_option("--predictions-out", eval_preds, "Predictions JSONL");

  // adapt
  auto* adapt = app.add_subcommand("adapt", "Test-time adaptation per topic");
  DatasetArgs adapt_in;
  std::string adapt_model, adapt_report, adapt_preds, adapt_episodes;
  std::optional<std::size_t> adapt_k;
  std::string label_mode, grouping;
  bool adapt_per_topic = false;
  adapt->add_option("--model", adapt_model, "Base model file or remote URL")->required();
  add_dataset_options(adapt, adapt_in);
  adapt->add_option("--k", adapt_k, "Generated posts per label")->check(CLI::PositiveNumber);
  adapt->add_option("--label-mode", label_mode, "two or three")
      ->check(CLI::IsMember({"two", "three"}));
  adapt->add_option("--grouping", grouping, "per_topic or per_input")
      ->check(CLI::IsMember({"per_topic", "per_input"}));
  adapt->add_flag("--per-topic", adapt_per_topic, "Include per-topic scores");
  adapt->add_option("--report", adapt_report, "EvalReport JSON ('-' for stdout)");
  adapt->add_option("--predictions-out", adapt_preds, "Predictions JSONL");
  adapt->add_option("--episodes-out", adapt_episodes, "Episode log JSON");

  // classify-llm
  auto* cls = app.add_subcommand("classify-llm", "Zero-shot LLM classification");
  DatasetArgs cls_in;
  std::string cls_report, cls_preds;
  bool cls_per_topic = false;
  add_dataset_options(cls, cls_in);
  cls->add_flag("--per-topic", cls_per_topic, "Include per-topic scores");
  cls->add_option("--report", cls_report, "EvalReport JSON ('-' for stdout)");
  cls->add_option("--predictions-out", cls_preds, "Predictions JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(ErrorCategory::Usage, e.get_name(), e.what());
  }

  try {
    RunConfig config = build_config(common);

    if (*gen) {
      RunConfig c = config;
      c.datagen.strict_length = c.datagen.strict_length || strict_length;
      Dataset posts = load(c, common, gen_in);
      auto gateway = make_gateway(c);
      MgtBuild built = build_mgt_dataset(posts, *gateway, datagen_config(c));
      write_dataset(built.dataset, gen_out, FormatTag::Mgt);
      write_or_print(gen_report, generation_report_json(built.report));
      std::cout << "posts " << built.report.posts_processed << " failed "
                << built.report.posts_failed << " accepted " << built.report.proposals_accepted
                << " examples " << built.dataset.size() << "\n";
    } else if (*stats) {
      Dataset d = load(config, common, stats_in);
      DatasetStats s = dataset_stats(d);
      auto top = top_topics(d, stats_top);
      std::cout << render_stats_table(s, top);
      write_or_print(stats_report, dataset_stats_json(s, top));
    } else if (*train) {
      RunConfig c = config;
      if (train_epochs) c.classifier.epochs = *train_epochs;
      if (train_lr) c.classifier.learning_rate = *train_lr;
      validate(c);
      Dataset d = load(c, common, train_in);
      LinearBackend backend(LinearModel(classifier_hyper(c)));
      TrainReport r = backend.train(d.examples(), parse_label_set(classes), {});
      backend.save(model_out);
      std::printf("epochs %d initial_loss %.6f final_loss %.6f\n", r.epochs_run,
                  r.initial_loss, r.final_loss);
    } else if (*eval) {
      Dataset d = load(config, common, eval_in);
      auto model = load_model(eval_model);
      PredictionSet preds = run_baseline(*model, d);
      write_or_print(eval_preds, predictions_jsonl(preds));
      print_eval(evaluate(d, preds, eval_per_topic), model->backend_id(), eval_report);
    } else if (*adapt) {
      RunConfig c = config;
      if (adapt_k) c.adapt.k = *adapt_k;
      if (!label_mode.empty()) c.adapt.label_mode = label_mode_from_name(label_mode);
      if (!grouping.empty()) c.adapt.grouping = grouping_from_name(grouping);
      validate(c);
      Dataset d = load(c, common, adapt_in);
      auto model = load_model(adapt_model);
      auto gateway = make_gateway(c);
      AdaptResult result =
          run_dymoadapt(*model, d, *gateway, datagen_config(c), adapt_config(c));
      write_or_print(adapt_preds, predictions_jsonl(result.predictions));
      write_or_print(adapt_episodes, episodes_json(result.episodes));
      print_eval(evaluate(d, result.predictions, adapt_per_topic),
                 model->backend_id() + " + adapt", adapt_report);
      std::size_t unadapted = 0;
      for (const EpisodeLog& e : result.episodes) unadapted += e.adapted ? 0 : 1;
      if (unadapted > 0) {
        std::cerr << "warning: " << unadapted << " of " << result.episodes.size()
                  << " episodes ran without adaptation (no generated examples)\n";
      }
    } else if (*cls) {
      Dataset d = load(config, common, cls_in);
      auto gateway = make_gateway(config);
      LlmBackend backend(*gateway, classify_options(config), config.classify_llm.fallback);
      PredictionSet preds = run_baseline(backend, d);
      write_or_print(cls_preds, predictions_jsonl(preds));
      print_eval(evaluate(d, preds, cls_per_topic), config.gateway.model, cls_report);
      if (backend.unparseable() > 0) {
        std::cerr << "warning: " << backend.unparseable() << " unparseable answers mapped to "
                  << label_name(config.classify_llm.fallback) << "\n";
      }
    }
  } catch (const Error& e) {
    return report_error(e.category(), code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCategory::Data, "Io", e.what());
  }
  return 0;
}
