// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bsim/config.hpp"
#include "bsim/cost.hpp"
#include "bsim/stats.hpp"

namespace bsim {

enum class MicroOp { Getppid, Read, Write, SendTo, RecvFrom };

inline constexpr std::array<MicroOp, 5> kAllMicroOps = {MicroOp::Getppid, MicroOp::Read, MicroOp::Write,
                                                        MicroOp::SendTo, MicroOp::RecvFrom};
inline constexpr std::array<std::uint64_t, 5> kPayloadSweep = {1, 64, 512, 4096, 8192};

std::string_view op_name(MicroOp op) noexcept;
std::optional<MicroOp> parse_op(std::string_view name) noexcept;

struct BenchEnv {
  WeightTable weights = default_weights();
  std::uint64_t seed = 42;
};

// 64-bit FNV-1a, used for every application-visible output digest.
class OutputHash {
 public:
  void add(const void* data, std::size_t n) noexcept;
  void add_u64(std::uint64_t v) noexcept;
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

struct MicroReport {
  SampleSet samples;
  std::uint64_t output_hash = 0;
};

// Times `iters` calls of one operation. The peer end keeps buffers filled or
// drained so no call ever sleeps.
MicroReport run_micro(const RunSetup& setup, MicroOp op, std::uint64_t payload, std::uint64_t iters,
                      const BenchEnv& env = {});

enum class FaultRegion { Stack, Mmap };

std::string_view region_name(FaultRegion r) noexcept;

struct PageFaultReport {
  SampleSet samples;
  std::uint64_t output_hash = 0;  // page map of the faulting address space
};

PageFaultReport run_pagefault_bench(const RunSetup& setup, std::uint64_t npages, FaultRegion region,
                                    const BenchEnv& env = {});

struct KvParams {
  std::uint32_t clients = 30;
  std::uint64_t requests_per_client = 1000;
  std::uint32_t gets_per_set = 10;  // one set for every `gets_per_set` gets
  std::uint64_t keys_per_client = 64;
  Cycles think_time = 0;  // client compute between requests
  Cycles service_compute = 80'000;  // server application work per request
};

struct KvReport {
  SampleSet samples;  // per-request latency seen by clients
  StatsSummary stats;
  double throughput = 0;  // requests per million cycles
  Cycles elapsed = 0;     // until the last client finished
  std::uint64_t store_hash = 0;
  std::uint64_t output_hash = 0;  // replies plus final store
};

KvReport run_kv_bench(const RunSetup& setup, const KvParams& params, const BenchEnv& env = {});

struct LoadPoint {
  double offered = 0;  // requests per million cycles
  double throughput = 0;
  Cycles p99 = 0;
};

struct LoadSweepReport {
  std::vector<LoadPoint> points;
  double max_load_within_sla = 0;
};

// Runs the KV workload once per think time (longest first) and reports the
// highest offered load whose p99 stays within `sla`.
LoadSweepReport run_kv_load_sweep(const RunSetup& setup, KvParams params, Cycles sla,
                                  const std::vector<Cycles>& think_times, const BenchEnv& env = {});

struct RingParams {
  std::uint64_t rows = 1000;
  std::uint32_t min_message = 8;
  std::uint32_t max_message = 24;
  Cycles row_compute = 200;
  // Background daemon on every node: seeded bursts in [burst_min, burst_max].
  Cycles burst_min = 50'000;
  Cycles burst_max = 400'000;
  Cycles timeslice = 200'000;
};

struct RingReport {
  SampleSet rounds;  // node 0's per-row durations
  StatsSummary stats;
  Cycles total_cycles = 0;
  std::uint64_t output_hash = 0;
};

RingReport run_ring_bench(const RunSetup& setup, const RingParams& params, const BenchEnv& env = {});

// One run per seed (env.seed + i); samples are the runs' total cycles.
SampleSet run_ring_repeated(const RunSetup& setup, const RingParams& params, std::uint32_t runs,
                            const BenchEnv& env = {});

}  // namespace bsim
