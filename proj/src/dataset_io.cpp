#include "stancekit/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "stancekit/error.hpp"
#include "stancekit/random.hpp"

namespace stancekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the row starts
  std::vector<std::string> fields;
};

std::vector<CsvRow> parse_csv_rows(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<CsvRow> rows;
  CsvRow row{1, {}};
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{line, {}};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      ++line;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(row.line) + ": unterminated quoted field");
  }
  if (field_started || !row.fields.empty()) end_row();
  return rows;
}

std::string read_all(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

[[noreturn]] void fail_at(std::size_t line, const std::string& reason,
                          ErrorCode code = ErrorCode::ParseError) {
  throw Error(code, "line " + std::to_string(line) + ": " + reason);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  fail_at(1, "header has no column '" + name + "'");
}

void add_row(Dataset& dataset, std::size_t line, std::string id, std::string post,
             std::string topic, std::string_view label_text, const LabelScheme& scheme) {
  StanceExample ex;
  ex.id = std::move(id);
  ex.post = std::move(post);
  ex.topic = std::move(topic);
  std::optional<StanceLabel> label = scheme.lookup(label_text);
  if (!label) {
    fail_at(line, "label '" + std::string(label_text) + "' is not in scheme " + scheme.name(),
            ErrorCode::UnknownLabel);
  }
  ex.label = label;
  try {
    dataset.add(std::move(ex));
  } catch (const Error& e) {
    fail_at(line, e.what());
  }
}

Dataset read_vast(std::string_view text, const ReadOptions& options, const LabelScheme& scheme) {
  std::vector<CsvRow> rows = parse_csv_rows(text);
  Dataset dataset(FormatTag::Vast);
  if (rows.empty()) return dataset;
  const auto& header = rows.front().fields;
  const std::size_t post = column_index(header, options.vast.post);
  const std::size_t topic = column_index(header, options.vast.topic);
  const std::size_t label = column_index(header, options.vast.label);
  const std::size_t width = std::max({post, topic, label}) + 1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() < width) {
      fail_at(row.line, "expected at least " + std::to_string(width) + " columns, found " +
                            std::to_string(row.fields.size()));
    }
    add_row(dataset, row.line, "vast:" + std::to_string(r), row.fields[post],
            row.fields[topic], row.fields[label], scheme);
  }
  return dataset;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

Dataset read_semeval(std::string_view text, const ReadOptions& options,
                     const LabelScheme& scheme) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  Dataset dataset(FormatTag::Semeval);
  std::vector<std::string> header;
  std::size_t post = 0, topic = 0, label = 0, width = 0;
  std::size_t line_no = 0, row = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t eol = text.find('\n', start);
    std::string_view line =
        text.substr(start, eol == std::string_view::npos ? std::string_view::npos : eol - start);
    start = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_tabs(line);
    if (header.empty()) {
      header = std::move(fields);
      post = column_index(header, options.semeval_post);
      topic = column_index(header, options.semeval_topic);
      label = column_index(header, options.semeval_label);
      width = std::max({post, topic, label}) + 1;
      continue;
    }
    if (fields.size() < width) {
      fail_at(line_no, "expected at least " + std::to_string(width) + " tab-separated fields");
    }
    ++row;
    add_row(dataset, line_no, "semeval:" + std::to_string(row), fields[post], fields[topic],
            fields[label], scheme);
  }
  return dataset;
}

Dataset read_mgt(std::string_view text, const LabelScheme& scheme) {
  Dataset dataset(FormatTag::Mgt);
  std::size_t line_no = 0, row = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t eol = text.find('\n', start);
    std::string_view line =
        text.substr(start, eol == std::string_view::npos ? std::string_view::npos : eol - start);
    start = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_at(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail_at(line_no, "expected a JSON object");
    auto field = [&](const char* name) -> std::string {
      auto it = obj.find(name);
      if (it == obj.end() || !it->is_string()) {
        fail_at(line_no, std::string("missing string field '") + name + "'");
      }
      return it->get<std::string>();
    };
    ++row;
    add_row(dataset, line_no, "mgt:" + std::to_string(row), field("post"), field("topic"),
            field("label"), scheme);
  }
  return dataset;
}

std::string label_surface(StanceLabel label, const LabelScheme& scheme) {
  auto surface = scheme.surface(label);
  if (!surface) {
    throw Error(ErrorCode::UnknownLabel, "scheme " + scheme.name() + " cannot express label " +
                                             std::string(label_name(label)));
  }
  return *surface;
}

std::string csv_field(std::string_view value) {
  bool needs_quotes = value.find_first_of(",\"\r\n") != std::string_view::npos ||
                      (!value.empty() && (value.front() == ' ' || value.back() == ' '));
  if (!needs_quotes) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

json scores_json(const ClassScores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

}  // namespace

std::string default_scheme(FormatTag format) {
  switch (format) {
    case FormatTag::Vast: return "vast-numeric";
    case FormatTag::Semeval: return "semeval";
    case FormatTag::Mgt: return "llm-answer";
  }
  return "llm-answer";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (CsvRow& row : parse_csv_rows(text)) out.push_back(std::move(row.fields));
  return out;
}

Dataset read_dataset(std::istream& in, FormatTag format, const ReadOptions& options) {
  const LabelScheme& scheme = LabelScheme::builtin(options.scheme.value_or(default_scheme(format)));
  const std::string text = read_all(in);
  switch (format) {
    case FormatTag::Vast: return read_vast(text, options, scheme);
    case FormatTag::Semeval: return read_semeval(text, options, scheme);
    case FormatTag::Mgt: return read_mgt(text, scheme);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown format");
}

Dataset read_dataset(const fs::path& path, FormatTag format, const ReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset " + path.string());
  try {
    return read_dataset(in, format, options);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_dataset(const Dataset& dataset, std::ostream& out, FormatTag format,
                   const ReadOptions& options) {
  const LabelScheme& scheme = LabelScheme::builtin(options.scheme.value_or(default_scheme(format)));
  for (const StanceExample& ex : dataset) {
    if (!ex.label) {
      throw Error(ErrorCode::InvalidArgument, "cannot write unlabeled example " + ex.id);
    }
  }
  switch (format) {
    case FormatTag::Mgt:
      for (const StanceExample& ex : dataset) {
        std::string source = ex.id;
        if (auto bar = source.find('|'); bar != std::string::npos) source.resize(bar);
        json obj = {{"post", ex.post},
                    {"topic", ex.topic},
                    {"label", label_surface(*ex.label, scheme)},
                    {"source_post_id", source}};
        out << obj.dump() << '\n';
      }
      break;
    case FormatTag::Vast:
      out << csv_field(options.vast.post) << ',' << csv_field(options.vast.topic) << ','
          << csv_field(options.vast.label) << '\n';
      for (const StanceExample& ex : dataset) {
        out << csv_field(ex.post) << ',' << csv_field(ex.topic) << ','
            << csv_field(label_surface(*ex.label, scheme)) << '\n';
      }
      break;
    case FormatTag::Semeval:
      out << options.semeval_post << '\t' << options.semeval_topic << '\t'
          << options.semeval_label << '\n';
      for (const StanceExample& ex : dataset) {
        for (const std::string* f : {&ex.post, &ex.topic}) {
          if (f->find_first_of("\t\r\n") != std::string::npos) {
            throw Error(ErrorCode::InvalidArgument,
                        "example " + ex.id + " has a tab or newline; use mgt or vast");
          }
        }
        out << ex.post << '\t' << ex.topic << '\t' << label_surface(*ex.label, scheme) << '\n';
      }
      break;
  }
  if (!out) throw Error(ErrorCode::Io, "dataset write failed");
}

void write_dataset(const Dataset& dataset, const fs::path& path, FormatTag format,
                   const ReadOptions& options) {
  std::ostringstream buf;
  write_dataset(dataset, buf, format, options);
  write_text(path, buf.str());
}

Dataset sample_dataset(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n >= dataset.size()) return dataset;
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  deterministic_shuffle(std::span<std::size_t>(idx), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  Dataset out(dataset.format());
  for (std::size_t i : idx) out.add(dataset[i]);
  return out;
}

std::string predictions_jsonl(const PredictionSet& predictions) {
  std::string out;
  for (const PredictionRecord& r : predictions) {
    json obj = {{"example_id", r.example_id},
                {"gold", r.gold ? json(label_name(*r.gold)) : json(nullptr)},
                {"predicted", label_name(r.predicted)},
                {"probabilities",
                 json::array({r.probabilities[0], r.probabilities[1], r.probabilities[2]})}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string episodes_json(const std::vector<EpisodeLog>& episodes) {
  json arr = json::array();
  for (const EpisodeLog& e : episodes) {
    arr.push_back({{"episode", e.episode},
                   {"topic", e.topic},
                   {"generated_count", e.generated_count},
                   {"dropped_count", e.dropped_count},
                   {"partial", e.partial},
                   {"adapted", e.adapted},
                   {"epochs_run", e.epochs_run},
                   {"pre_train_loss", e.pre_train_loss},
                   {"post_train_loss", e.post_train_loss},
                   {"examples_predicted", e.examples_predicted}});
  }
  return arr.dump(2) + "\n";
}

std::string eval_report_json(const EvalReport& report) {
  json per_class = json::object();
  for (StanceLabel l : kAllLabels) {
    per_class[std::string(label_name(l))] = scores_json(report.per_class[index_of(l)]);
  }
  json obj = {{"n_scored", report.n_scored},
              {"n_unscored", report.n_unscored},
              {"macro_f1_pro_con", report.macro_f1_pro_con},
              {"macro_f1_all", report.macro_f1_all},
              {"per_class", per_class}};
  if (report.per_topic) obj["per_topic"] = *report.per_topic;
  return obj.dump(2) + "\n";
}

std::string generation_report_json(const GenerationReport& r) {
  json obj = {{"posts_processed", r.posts_processed},
              {"posts_failed", r.posts_failed},
              {"proposals_parsed", r.proposals_parsed},
              {"proposals_accepted", r.proposals_accepted},
              {"proposals_rejected_malformed", r.proposals_rejected_malformed},
              {"proposals_rejected_label", r.proposals_rejected_label},
              {"proposals_rejected_length", r.proposals_rejected_length},
              {"proposals_duplicate", r.proposals_duplicate},
              {"proposals_flagged_length", r.proposals_flagged_length},
              {"llm_retries", r.llm_retries}};
  return obj.dump(2) + "\n";
}

std::string dataset_stats_json(const DatasetStats& s,
                               const std::vector<std::pair<std::string, std::size_t>>& top) {
  json labels = json::object();
  for (StanceLabel l : kAllLabels) labels[std::string(label_name(l))] = s.n_per_label[index_of(l)];
  json top_json = json::array();
  for (const auto& [topic, n] : top) top_json.push_back({{"topic", topic}, {"frequency", n}});
  json obj = {{"n_examples", s.n_examples},
              {"n_per_label", labels},
              {"n_unlabeled", s.n_unlabeled},
              {"n_unique_posts", s.n_unique_posts},
              {"n_unique_topics", s.n_unique_topics},
              {"n_topic_words", s.n_topic_words},
              {"n_unique_topic_words", s.n_unique_topic_words},
              {"avg_words_per_topic", s.avg_words_per_topic},
              {"top_topics", top_json}};
  return obj.dump(2) + "\n";
}

std::string render_stats_table(const DatasetStats& s,
                               const std::vector<std::pair<std::string, std::size_t>>& top) {
  std::ostringstream out;
  auto row = [&](std::string_view name, const std::string& value) {
    out << std::left << std::setw(34) << name << value << '\n';
  };
  char avg[32];
  std::snprintf(avg, sizeof avg, "%.2f", s.avg_words_per_topic);
  row("# Examples", std::to_string(s.n_examples));
  row("# Examples with Agree label", std::to_string(s.n_per_label[0]));
  row("# Examples with Disagree label", std::to_string(s.n_per_label[1]));
  row("# Examples with Neutral label", std::to_string(s.n_per_label[2]));
  row("# Unique Post", std::to_string(s.n_unique_posts));
  row("# Unique Topics", std::to_string(s.n_unique_topics));
  row("# of Words in Topic", std::to_string(s.n_topic_words));
  row("# of Unique Words in Topic", std::to_string(s.n_unique_topic_words));
  row("Average # of words per Topic", avg);
  if (!top.empty()) {
    out << '\n';
    std::size_t width = 5;
    for (const auto& [topic, n] : top) width = std::max(width, topic.size());
    out << std::left << std::setw(static_cast<int>(width + 2)) << "Topic" << "Frequency\n";
    for (const auto& [topic, n] : top) {
      out << std::left << std::setw(static_cast<int>(width + 2)) << topic << n << '\n';
    }
  }
  return out.str();
}

std::string render_eval_table(const EvalReport& report, std::string_view model_name) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Model" << std::setw(8) << "Pro" << std::setw(8)
      << "Con" << std::setw(8) << "Neut" << std::setw(12) << "F1(pro,con)" << "F1(all)\n";
  out << std::left << std::setw(16) << model_name << std::setw(8)
      << pct(report.per_class[0].f1) << std::setw(8) << pct(report.per_class[1].f1)
      << std::setw(8) << pct(report.per_class[2].f1) << std::setw(12)
      << pct(report.macro_f1_pro_con) << pct(report.macro_f1_all) << '\n';
  if (report.per_topic && !report.per_topic->empty()) {
    out << '\n';
    std::size_t width = 5;
    for (const auto& [topic, v] : *report.per_topic) width = std::max(width, topic.size());
    out << std::left << std::setw(static_cast<int>(width + 2)) << "Topic" << "F1(pro,con)\n";
    for (const auto& [topic, v] : *report.per_topic) {
      out << std::left << std::setw(static_cast<int>(width + 2)) << topic << pct(v) << '\n';
    }
  }
  out << "\nscored " << report.n_scored << " examples";
  if (report.n_unscored) out << " (" << report.n_unscored << " without gold label)";
  out << '\n';
  return out.str();
}

void write_text(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_all(in);
}

}  // namespace stancekit
