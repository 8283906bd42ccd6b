// SPDX-License-Identifier: Apache-2.0
#include "bsim/cost.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "bsim/error.hpp"

#ifndef BSIM_DEFAULT_WEIGHTS
#define BSIM_DEFAULT_WEIGHTS "config/weights.default"
#endif

namespace bsim {

namespace {

constexpr std::array<std::string_view, kCostEventCount> kEventNames = {
    "ModeSwitchEnter", "ModeSwitchExit",   "IretReturn",  "RetReturn",   "StackSwitch",
    "EntryChecks",     "ExitChecks",       "DispatchLayer", "CopyByte",  "PageFaultVector",
    "DoubleFaultVector", "SchedWakeup",    "SchedSleep",
};

constexpr std::string_view kDelayKey = "DeliveryDelay";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view event_name(CostEvent ev) noexcept {
  return kEventNames[static_cast<std::size_t>(ev)];
}

std::optional<CostEvent> event_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kCostEventCount; ++i) {
    if (kEventNames[i] == name) return static_cast<CostEvent>(i);
  }
  return std::nullopt;
}

WeightTable parse_weights(std::string_view text) {
  WeightTable table;
  std::array<bool, kCostEventCount> seen{};
  bool seen_delay = false;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = "line " + std::to_string(line_no);
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw SimError(Errc::BadWeights, where + ": expected key=value");
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    Cycles parsed = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
    if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) {
      throw SimError(Errc::BadWeights, where + ": value is not a non-negative integer");
    }

    if (key == kDelayKey) {
      if (seen_delay) throw SimError(Errc::BadWeights, where + ": duplicate key DeliveryDelay");
      seen_delay = true;
      table.delivery_delay = parsed;
      continue;
    }
    auto ev = event_from_name(key);
    if (!ev) throw SimError(Errc::BadWeights, where + ": unknown key '" + std::string(key) + "'");
    auto idx = static_cast<std::size_t>(*ev);
    if (seen[idx]) throw SimError(Errc::BadWeights, where + ": duplicate key " + std::string(key));
    seen[idx] = true;
    table.cycles[idx] = parsed;
  }
  for (std::size_t i = 0; i < kCostEventCount; ++i) {
    if (!seen[i]) throw SimError(Errc::BadWeights, "missing key " + std::string(kEventNames[i]));
  }
  if (!seen_delay) throw SimError(Errc::BadWeights, "missing key DeliveryDelay");
  return table;
}

WeightTable load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError(Errc::IoError, "cannot open weights file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_weights(buf.str());
}

std::string format_weights(const WeightTable& weights) {
  std::string out;
  for (std::size_t i = 0; i < kCostEventCount; ++i) {
    out += kEventNames[i];
    out += '=';
    out += std::to_string(weights.cycles[i]);
    out += '\n';
  }
  out += kDelayKey;
  out += '=';
  out += std::to_string(weights.delivery_delay);
  out += '\n';
  return out;
}

std::filesystem::path default_weights_path() { return BSIM_DEFAULT_WEIGHTS; }

WeightTable default_weights() { return load_weights(default_weights_path()); }

EventCounts::EventCounts(std::initializer_list<std::pair<CostEvent, std::uint64_t>> init) {
  for (const auto& [ev, count] : init) (*this)[ev] += count;
}

std::uint64_t EventCounts::total() const noexcept {
  std::uint64_t sum = 0;
  for (auto v : n) sum += v;
  return sum;
}

EventCounts operator-(const EventCounts& a, const EventCounts& b) {
  EventCounts out;
  for (std::size_t i = 0; i < kCostEventCount; ++i) out.n[i] = a.n[i] - b.n[i];
  return out;
}

EventCounts operator+(const EventCounts& a, const EventCounts& b) {
  EventCounts out;
  for (std::size_t i = 0; i < kCostEventCount; ++i) out.n[i] = a.n[i] + b.n[i];
  return out;
}

std::string to_string(const EventCounts& counts) {
  std::string out = "{";
  bool first = true;
  for (std::size_t i = 0; i < kCostEventCount; ++i) {
    if (counts.n[i] == 0) continue;
    if (!first) out += ", ";
    first = false;
    out += kEventNames[i];
    out += ':';
    out += std::to_string(counts.n[i]);
  }
  return out + "}";
}

void CostLedger::record(CostEvent ev, TaskId task, std::uint64_t count) {
  if (count == 0) return;
  counts_[ev] += count;
  if (tracing_) trace_.push_back({ev, task, count});
}

Cycles weighted_cycles(const EventCounts& counts, const WeightTable& weights) {
  Cycles sum = 0;
  for (std::size_t i = 0; i < kCostEventCount; ++i) sum += counts.n[i] * weights.cycles[i];
  return sum;
}

Cycles ledger_cycles(const CostLedger& ledger) { return weighted_cycles(ledger.counts(), ledger.weights()); }

}  // namespace bsim
