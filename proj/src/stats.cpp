// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <bit>
#include <cmath>

#include "bsim/error.hpp"
#include "bsim/stats.hpp"

namespace bsim {

Cycles nearest_rank(const std::vector<Cycles>& sorted, double q) {
  if (sorted.empty()) throw SimError(Errc::EmptyAfterDiscard, "percentile of an empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

StatsSummary summarize(std::vector<Cycles> values, std::size_t discard_worst) {
  if (values.size() <= discard_worst) {
    throw SimError(Errc::EmptyAfterDiscard, std::to_string(values.size()) + " samples, " +
                                                std::to_string(discard_worst) + " discarded");
  }
  std::sort(values.begin(), values.end());
  values.resize(values.size() - discard_worst);

  StatsSummary s;
  s.n = values.size();
  s.min = values.front();
  s.max = values.back();
  long double sum = 0;
  for (Cycles v : values) sum += v;
  s.mean = static_cast<double>(sum / s.n);
  long double sq = 0;
  for (Cycles v : values) {
    const long double d = static_cast<long double>(v) - s.mean;
    sq += d * d;
  }
  s.stdev = static_cast<double>(std::sqrt(sq / s.n));
  s.cv = s.mean == 0 ? 0.0 : s.stdev / s.mean;
  s.p99 = nearest_rank(values, 0.99);

  const int top = std::bit_width(s.max);
  for (int k = 0; k <= top; ++k) {
    HistogramBucket b;
    b.lower = k == 0 ? 0 : Cycles{1} << (k - 1);
    b.upper = Cycles{1} << k;
    s.histogram.push_back(b);
  }
  for (Cycles v : values) ++s.histogram[static_cast<std::size_t>(std::bit_width(v))].count;

  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    s.cdf.push_back(CdfPoint{values[i], static_cast<double>(i + 1) / static_cast<double>(s.n)});
  }
  return s;
}

StatsSummary summarize(const SampleSet& samples, std::size_t discard_worst) {
  return summarize(samples.values, discard_worst);
}

double improvement(double trap_mean, double other_mean) {
  if (trap_mean == 0) return 0;
  return (trap_mean - other_mean) / trap_mean;
}

}  // namespace bsim
