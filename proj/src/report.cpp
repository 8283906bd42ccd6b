// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "bsim/error.hpp"
#include "bsim/report.hpp"
#include "json.hpp"

namespace bsim {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::optional<double> payload_of(std::string_view workload) {
  const auto pos = workload.rfind(':');
  if (pos == std::string_view::npos) return std::nullopt;
  const auto tail = workload.substr(pos + 1);
  double v = 0;
  auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), v);
  if (ec != std::errc{} || p != tail.data() + tail.size()) return std::nullopt;
  return v;
}

std::string series_of(std::string_view workload) {
  const auto pos = workload.rfind(':');
  return std::string(pos == std::string_view::npos ? workload : workload.substr(0, pos));
}

std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, std::string_view s, std::string_view anchor = "start") {
  return "<text x=\"" + format_number(x) + "\" y=\"" + format_number(y) + "\" text-anchor=\"" +
         std::string(anchor) + "\">" + escape_xml(s) + "</text>\n";
}

}  // namespace

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::optional<Format> parse_format(std::string_view name) noexcept {
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  return std::nullopt;
}

std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, p);
}

std::string raw_csv(const std::vector<SampleSet>& sets) {
  std::string out = "workload,config,iter,cycles\n";
  for (const auto& s : sets) {
    const std::string prefix = csv_field(s.workload) + "," + csv_field(s.config) + ",";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      out += prefix + std::to_string(i) + "," + std::to_string(s.values[i]) + "\n";
    }
  }
  return out;
}

std::string summary_csv(const std::vector<SampleSet>& sets, std::size_t discard_worst) {
  std::string out = "workload,config,mean,stdev,cv,p99,min,max,n\n";
  for (const auto& s : sets) {
    const StatsSummary m = summarize(s, discard_worst);
    out += csv_field(s.workload) + "," + csv_field(s.config) + "," + format_number(m.mean) + "," +
           format_number(m.stdev) + "," + format_number(m.cv) + "," + std::to_string(m.p99) + "," +
           std::to_string(m.min) + "," + std::to_string(m.max) + "," + std::to_string(m.n) + "\n";
  }
  return out;
}

std::string report_json(const std::vector<SampleSet>& sets, std::size_t discard_worst) {
  nlohmann::ordered_json doc;
  doc["summary"] = nlohmann::ordered_json::array();
  doc["raw"] = nlohmann::ordered_json::array();
  for (const auto& s : sets) {
    const StatsSummary m = summarize(s, discard_worst);
    nlohmann::ordered_json row;
    row["workload"] = s.workload;
    row["config"] = s.config;
    row["mean"] = m.mean;
    row["stdev"] = m.stdev;
    row["cv"] = m.cv;
    row["p99"] = m.p99;
    row["min"] = m.min;
    row["max"] = m.max;
    row["n"] = m.n;
    doc["summary"].push_back(std::move(row));

    nlohmann::ordered_json raw;
    raw["workload"] = s.workload;
    raw["config"] = s.config;
    raw["cycles"] = s.values;
    doc["raw"].push_back(std::move(raw));
  }
  return doc.dump(2) + "\n";
}

Comparison compare(const SampleSet& baseline, const SampleSet& against) {
  Comparison c;
  c.workload = baseline.workload;
  c.baseline = baseline.config;
  c.against = against.config;
  c.baseline_mean = summarize(baseline).mean;
  c.against_mean = summarize(against).mean;
  c.improvement_pct = 100.0 * improvement(c.baseline_mean, c.against_mean);
  return c;
}

std::string comparison_csv(const std::vector<Comparison>& rows) {
  std::string out = "workload,baseline,against,baseline_mean,against_mean,improvement_pct\n";
  for (const auto& r : rows) {
    out += csv_field(r.workload) + "," + csv_field(r.baseline) + "," + csv_field(r.against) + "," +
           format_number(r.baseline_mean) + "," + format_number(r.against_mean) + "," +
           format_number(r.improvement_pct) + "\n";
  }
  return out;
}

std::string comparison_json(const std::vector<Comparison>& rows) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["workload"] = r.workload;
    j["baseline"] = r.baseline;
    j["against"] = r.against;
    j["baseline_mean"] = r.baseline_mean;
    j["against_mean"] = r.against_mean;
    j["improvement_pct"] = r.improvement_pct;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string svg_latency_vs_payload(const std::vector<SampleSet>& sets) {
  constexpr int W = 720, H = 420, L = 80, R = 180, T = 30, B = 50;
  // (series, config) -> payload -> mean
  std::map<std::pair<std::string, std::string>, std::map<double, double>> lines;
  std::vector<std::pair<std::string, std::string>> order;
  std::set<double> xs;
  double ymax = 0;
  for (const auto& s : sets) {
    const auto x = payload_of(s.workload);
    if (!x || s.values.empty()) continue;
    const auto key = std::make_pair(series_of(s.workload), s.config);
    if (!lines.count(key)) order.push_back(key);
    const double mean = summarize(s).mean;
    lines[key][*x] = mean;
    xs.insert(*x);
    ymax = std::max(ymax, mean);
  }
  std::string out = svg_open(W, H);
  out += text(W / 2.0, 18, "mean latency (cycles) vs payload (bytes)", "middle");
  if (xs.empty() || ymax <= 0) return out + "</svg>\n";

  const std::vector<double> xv(xs.begin(), xs.end());
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double x) {
    const auto i = std::lower_bound(xv.begin(), xv.end(), x) - xv.begin();
    return L + (xv.size() == 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(xv.size() - 1));
  };
  auto py = [&](double y) { return T + ph - ph * y / (ymax * 1.05); };

  out += "<line x1=\"" + format_number(L) + "\" y1=\"" + format_number(T + ph) + "\" x2=\"" + format_number(L + pw) +
         "\" y2=\"" + format_number(T + ph) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + format_number(L) + "\" y1=\"" + format_number(T) + "\" x2=\"" + format_number(L) +
         "\" y2=\"" + format_number(T + ph) + "\" stroke=\"black\"/>\n";
  for (double x : xv) out += text(px(x), T + ph + 16, format_number(x), "middle");
  for (int k = 0; k <= 4; ++k) {
    const double y = ymax * 1.05 * k / 4.0;
    out += text(L - 6, py(y) + 4, format_number(std::round(y)), "end");
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& pts = lines[order[i]];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string poly;
    for (const auto& [x, y] : pts) poly += format_number(px(x)) + "," + format_number(py(y)) + " ";
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + poly +
           "\"/>\n";
    for (const auto& [x, y] : pts) {
      out += "<circle cx=\"" + format_number(px(x)) + "\" cy=\"" + format_number(py(y)) + "\" r=\"3\" fill=\"" +
             color + "\"/>\n";
    }
    const double ly = T + 14.0 * static_cast<double>(i);
    out += "<rect x=\"" + format_number(W - R + 10) + "\" y=\"" + format_number(ly) +
           "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    out += text(W - R + 24, ly + 9, order[i].first + " [" + order[i].second + "]");
  }
  return out + "</svg>\n";
}

std::string svg_histogram_cdf(const std::vector<SampleSet>& sets) {
  constexpr int W = 720, PH = 200, L = 70, R = 60, T = 30, GAP = 40;
  const int H = T + static_cast<int>(sets.size()) * (PH + GAP) + 10;
  std::string out = svg_open(W, H);
  std::size_t max_buckets = 1;
  std::vector<StatsSummary> sums;
  for (const auto& s : sets) {
    sums.push_back(summarize(s));
    max_buckets = std::max(max_buckets, sums.back().histogram.size());
  }
  const double pw = W - L - R;
  const double bw = pw / static_cast<double>(max_buckets);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const StatsSummary& m = sums[i];
    const double top = T + static_cast<double>(i) * (PH + GAP);
    const char* color = kPalette[i % std::size(kPalette)];
    out += text(L, top - 8, sets[i].workload + " [" + sets[i].config + "]  mean " + format_number(std::round(m.mean)) +
                                 "  p99 " + std::to_string(m.p99));
    out += "<rect x=\"" + format_number(L) + "\" y=\"" + format_number(top) + "\" width=\"" + format_number(pw) +
           "\" height=\"" + std::to_string(PH) + "\" fill=\"none\" stroke=\"black\"/>\n";
    std::uint64_t peak = 1;
    for (const auto& b : m.histogram) peak = std::max(peak, b.count);
    for (std::size_t k = 0; k < m.histogram.size(); ++k) {
      const double h = PH * static_cast<double>(m.histogram[k].count) / static_cast<double>(peak);
      out += "<rect x=\"" + format_number(L + bw * static_cast<double>(k) + 1) + "\" y=\"" +
             format_number(top + PH - h) + "\" width=\"" + format_number(std::max(1.0, bw - 2)) + "\" height=\"" +
             format_number(h) + "\" fill=\"" + color + "\" fill-opacity=\"0.6\"/>\n";
      if (k % 4 == 0) out += text(L + bw * (static_cast<double>(k) + 0.5), top + PH + 14, "2^" + std::to_string(k), "middle");
    }
    // CDF on the same log2 axis, fraction on the right-hand scale.
    std::string poly;
    for (const auto& p : m.cdf) {
      const double bucket = p.value == 0 ? 0.0 : std::log2(static_cast<double>(p.value)) + 1.0;
      poly += format_number(L + bw * bucket) + "," + format_number(top + PH - PH * p.fraction) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"2\" points=\"" + poly + "\"/>\n";
    out += text(L + pw + 6, top + 10, "1.0");
    out += text(L + pw + 6, top + PH, "0.0");
  }
  return out + "</svg>\n";
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw SimError(Errc::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw SimError(Errc::IoError, "cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw SimError(Errc::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw SimError(Errc::IoError, "cannot rename onto " + path.string());
  }
}

std::vector<std::filesystem::path> emit_report(const std::vector<SampleSet>& sets, const std::filesystem::path& dir,
                                               const EmitOptions& opts) {
  if (sets.empty()) throw SimError(Errc::BadArgument, "no results to report");
  std::vector<std::filesystem::path> files;
  auto put = [&](const std::string& name, const std::string& body) {
    const auto p = dir / name;
    write_atomic(p, body);
    files.push_back(p);
  };
  if (opts.format == Format::Csv) {
    put(opts.stem + "_raw.csv", raw_csv(sets));
    put(opts.stem + "_summary.csv", summary_csv(sets, opts.discard_worst));
  } else {
    put(opts.stem + ".json", report_json(sets, opts.discard_worst));
  }
  if (opts.plot) {
    const bool sweep = std::any_of(sets.begin(), sets.end(), [](const SampleSet& s) { return payload_of(s.workload); });
    if (sweep) put(opts.stem + "_latency.svg", svg_latency_vs_payload(sets));
    put(opts.stem + "_histogram.svg", svg_histogram_cdf(sets));
  }
  if (opts.weights_text) put("weights.txt", *opts.weights_text);
  return files;
}

}  // namespace bsim
