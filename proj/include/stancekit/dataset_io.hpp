#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/adapt.hpp"
#include "stancekit/core.hpp"
#include "stancekit/datagen.hpp"
#include "stancekit/metrics.hpp"

namespace stancekit {

struct VastColumns {
  std::string post = "post";
  std::string topic = "new_topic";
  std::string label = "label";

  bool operator==(const VastColumns&) const = default;
};

struct ReadOptions {
  // Scheme name for the label column; per-format default when unset:
  // vast -> vast-numeric, semeval -> semeval, mgt -> llm-answer.
  std::optional<std::string> scheme;
  VastColumns vast;
  // Column names for the semeval header.
  std::string semeval_post = "Tweet";
  std::string semeval_topic = "Target";
  std::string semeval_label = "Stance";
};

std::string default_scheme(FormatTag format);

// vast: RFC 4180 CSV with a header row. semeval: tab-separated with a header
// row. mgt: JSONL with post, topic, label and optional source_post_id.
// Example ids are "<format>:<row>" with 1-based data rows. Errors carry the
// 1-based line number (Error ParseError / UnknownLabel).
Dataset read_dataset(const std::filesystem::path& path, FormatTag format,
                     const ReadOptions& options = {});
Dataset read_dataset(std::istream& in, FormatTag format, const ReadOptions& options = {});

// Labels are written with the format's default scheme surface strings.
// Unlabeled examples are rejected.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path,
                   FormatTag format = FormatTag::Mgt, const ReadOptions& options = {});
void write_dataset(const Dataset& dataset, std::ostream& out,
                   FormatTag format = FormatTag::Mgt, const ReadOptions& options = {});

// Parses an RFC 4180 document into rows. Quoted fields may span lines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Keeps n examples chosen by a seeded shuffle, in their original order.
Dataset sample_dataset(const Dataset& dataset, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Reports. All JSON output is written with sorted keys and no whitespace
// variance so identical runs produce identical bytes.

std::string predictions_jsonl(const PredictionSet& predictions);
std::string episodes_json(const std::vector<EpisodeLog>& episodes);
std::string eval_report_json(const EvalReport& report);
std::string generation_report_json(const GenerationReport& report);
std::string dataset_stats_json(const DatasetStats& stats,
                               const std::vector<std::pair<std::string, std::size_t>>& top);

// Plain-text tables for terminal output.
std::string render_stats_table(const DatasetStats& stats,
                               const std::vector<std::pair<std::string, std::size_t>>& top);
std::string render_eval_table(const EvalReport& report, std::string_view model_name);

void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

}  // namespace stancekit
