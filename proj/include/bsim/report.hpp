// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bsim/stats.hpp"

namespace bsim {

enum class Format { Csv, Json };

std::optional<Format> parse_format(std::string_view name) noexcept;

// Shortest round-trip decimal, '.' separator, no grouping.
std::string format_number(double v);

// Quotes a field containing a comma, quote or newline.
std::string csv_field(std::string_view s);

// workload,config,iter,cycles
std::string raw_csv(const std::vector<SampleSet>& sets);
// workload,config,mean,stdev,cv,p99,min,max,n
std::string summary_csv(const std::vector<SampleSet>& sets, std::size_t discard_worst = 0);
std::string report_json(const std::vector<SampleSet>& sets, std::size_t discard_worst = 0);

struct Comparison {
  std::string workload;
  std::string baseline;
  std::string against;
  double baseline_mean = 0;
  double against_mean = 0;
  double improvement_pct = 0;
};

Comparison compare(const SampleSet& baseline, const SampleSet& against);
// workload,baseline,against,baseline_mean,against_mean,improvement_pct
std::string comparison_csv(const std::vector<Comparison>& rows);
std::string comparison_json(const std::vector<Comparison>& rows);

// Mean latency against the numeric last ':' field of each workload label, one
// line per config.
std::string svg_latency_vs_payload(const std::vector<SampleSet>& sets);
// One panel per sample set: log2 histogram bars with the CDF overlaid.
std::string svg_histogram_cdf(const std::vector<SampleSet>& sets);

// Writes through a temporary file and rename; throws IoError.
void write_atomic(const std::filesystem::path& path, std::string_view content);

struct EmitOptions {
  Format format = Format::Csv;
  bool plot = false;
  std::size_t discard_worst = 0;
  std::string stem = "results";
  // Weight file text echoed next to the results, when set.
  std::optional<std::string> weights_text;
};

// Writes raw and summary tables (or one JSON file), optional plots and the
// weights echo into `dir`. Returns the files written, in order.
std::vector<std::filesystem::path> emit_report(const std::vector<SampleSet>& sets, const std::filesystem::path& dir,
                                               const EmitOptions& opts);

}  // namespace bsim
