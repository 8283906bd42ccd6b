// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bsim {

using Cycles = std::uint64_t;
using TaskId = std::uint32_t;

enum class CostEvent : std::uint8_t {
  ModeSwitchEnter,
  ModeSwitchExit,
  IretReturn,
  RetReturn,
  StackSwitch,
  EntryChecks,
  ExitChecks,
  DispatchLayer,
  CopyByte,
  PageFaultVector,
  DoubleFaultVector,
  SchedWakeup,
  SchedSleep,
};

inline constexpr std::size_t kCostEventCount = 13;

std::string_view event_name(CostEvent ev) noexcept;
std::optional<CostEvent> event_from_name(std::string_view name) noexcept;

inline constexpr std::array<CostEvent, kCostEventCount> kAllCostEvents = {
    CostEvent::ModeSwitchEnter, CostEvent::ModeSwitchExit,   CostEvent::IretReturn,
    CostEvent::RetReturn,       CostEvent::StackSwitch,      CostEvent::EntryChecks,
    CostEvent::ExitChecks,      CostEvent::DispatchLayer,    CostEvent::CopyByte,
    CostEvent::PageFaultVector, CostEvent::DoubleFaultVector, CostEvent::SchedWakeup,
    CostEvent::SchedSleep,
};

// Abstract cycles per event plus the loopback delivery delay.
struct WeightTable {
  std::array<Cycles, kCostEventCount> cycles{};
  Cycles delivery_delay = 0;

  Cycles operator[](CostEvent ev) const noexcept { return cycles[static_cast<std::size_t>(ev)]; }
  Cycles& operator[](CostEvent ev) noexcept { return cycles[static_cast<std::size_t>(ev)]; }

  friend bool operator==(const WeightTable&, const WeightTable&) = default;
};

// Flat key=value text. '#' starts a comment; every event key and
// DeliveryDelay must appear exactly once; unknown keys are rejected.
WeightTable parse_weights(std::string_view text);
WeightTable load_weights(const std::filesystem::path& path);
std::string format_weights(const WeightTable& weights);

// Path of the weight file shipped with the sources.
std::filesystem::path default_weights_path();
WeightTable default_weights();

// Per-event occurrence counts; value type used for ledger deltas in tests.
struct EventCounts {
  std::array<std::uint64_t, kCostEventCount> n{};

  EventCounts() = default;
  EventCounts(std::initializer_list<std::pair<CostEvent, std::uint64_t>> init);

  std::uint64_t operator[](CostEvent ev) const noexcept { return n[static_cast<std::size_t>(ev)]; }
  std::uint64_t& operator[](CostEvent ev) noexcept { return n[static_cast<std::size_t>(ev)]; }
  std::uint64_t total() const noexcept;

  friend EventCounts operator-(const EventCounts& a, const EventCounts& b);
  friend EventCounts operator+(const EventCounts& a, const EventCounts& b);
  friend bool operator==(const EventCounts&, const EventCounts&) = default;
};

std::string to_string(const EventCounts& counts);

struct TraceEntry {
  CostEvent event;
  TaskId task;
  std::uint64_t count;
};

class CostLedger {
 public:
  CostLedger() = default;
  explicit CostLedger(const WeightTable& weights) : weights_(weights) {}

  void record(CostEvent ev, TaskId task, std::uint64_t count = 1);

  const EventCounts& counts() const noexcept { return counts_; }
  const WeightTable& weights() const noexcept { return weights_; }
  std::uint64_t count(CostEvent ev) const noexcept { return counts_[ev]; }

  // Tracing is off by default; benchmarks record millions of events.
  void enable_trace(bool on) { tracing_ = on; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }

 private:
  WeightTable weights_;
  EventCounts counts_;
  bool tracing_ = false;
  std::vector<TraceEntry> trace_;
};

Cycles ledger_cycles(const CostLedger& ledger);
Cycles weighted_cycles(const EventCounts& counts, const WeightTable& weights);

}  // namespace bsim
