// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsim/cost.hpp"

namespace bsim {

// Per-iteration accounted-cycle latencies of one (workload, config) cell.
struct SampleSet {
  std::string workload;
  std::string config;
  std::vector<Cycles> values;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

// Values v with lower <= v < upper; bucket k holds values of bit width k.
struct HistogramBucket {
  Cycles lower = 0;
  Cycles upper = 0;
  std::uint64_t count = 0;
};

struct CdfPoint {
  Cycles value = 0;
  double fraction = 0;  // share of samples <= value
};

struct StatsSummary {
  double mean = 0;
  double stdev = 0;  // population
  double cv = 0;     // stdev / mean, 0 when the mean is 0
  Cycles p99 = 0;    // nearest rank
  Cycles min = 0;
  Cycles max = 0;
  std::size_t n = 0;
  std::vector<HistogramBucket> histogram;
  std::vector<CdfPoint> cdf;
};

// Nearest-rank percentile of an ascending sequence: element ceil(q*n) - 1.
Cycles nearest_rank(const std::vector<Cycles>& sorted, double q);

// Drops the `discard_worst` largest values, then summarizes the rest.
// Throws EmptyAfterDiscard when nothing would remain.
StatsSummary summarize(std::vector<Cycles> values, std::size_t discard_worst = 0);
StatsSummary summarize(const SampleSet& samples, std::size_t discard_worst = 0);

// (trap - other) / trap, as a fraction.
double improvement(double trap_mean, double other_mean);

}  // namespace bsim
