#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurocat/bottomup.hpp"
#include "neurocat/corpus_runner.hpp"
#include "neurocat/interleaving.hpp"
#include "neurocat/topdown.hpp"

namespace neurocat {

// --- machine-readable outputs ----------------------------------------------
// Aggregate CSVs are the single source for every rendering below.

std::string topdown_csv(const TopDownAggregate& agg);
std::string interleaving_csv(const InterleaveAggregate& agg);
std::string bottomup_csv(const BottomUpAggregate& agg);

// One JSON object per line; every line carries `run_digest`.
std::string topdown_jsonl(std::span<const NeuronTopDownResult> results, std::string_view run_digest);
std::string interleaving_jsonl(std::span<const NeuronInterleavingResult> results, std::string_view run_digest);
std::string bottomup_jsonl(std::span<const NeuronBottomUpResult> results, std::string_view run_digest);
std::string failures_jsonl(std::span<const NeuronFailure> failures);

std::string to_json(const NeuronRecord& record);
std::string to_json(const NeuronTopDownResult& result);
std::string to_json(std::span<const InterleaveCell> cells);
std::string to_json(const NeuronBottomUpResult& result);
std::string to_json(const TopDownAggregate& agg);
std::string to_json(const InterleaveAggregate& agg);
std::string to_json(const BottomUpAggregate& agg);

// --- renderings ------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a column; InvalidArgument when absent.
  std::size_t column(std::string_view name) const;
};

// Minimal CSV reader for the files written above (no quoting needed).
CsvTable parse_csv(std::string_view text);

struct RenderOptions {
  std::string title;
  std::string run_digest;
  bool deterministic = false;  // omit the timestamp comment
};

std::string render_markdown(const CsvTable& table, const RenderOptions& options);

// Grouped bars: one cluster of bars per row, one bar per value column.
std::string render_grouped_bars(const CsvTable& table, std::string_view category_column,
                                std::span<const std::string> value_columns, const RenderOptions& options);

// One polyline per value column across the rows.
std::string render_lines(const CsvTable& table, std::string_view category_column,
                         std::span<const std::string> value_columns, const RenderOptions& options);

}  // namespace neurocat
