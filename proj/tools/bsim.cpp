// SPDX-License-Identifier: Apache-2.0
// Command-line front end: runs benchmark families over boundary
// configurations and writes CSV/JSON tables and optional SVG plots.
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bsim/bench.hpp"
#include "bsim/error.hpp"
#include "bsim/report.hpp"
#include "json.hpp"

using namespace bsim;

namespace {

struct Common {
  std::vector<std::string> configs;
  // Unset: a token list with boundary flags implies the linked baseline and
  // an empty --config list means trap.
  std::optional<std::string> baseline;
  std::string weights_path;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
  std::string output_dir = "results";
  bool plot = false;
};

struct Prepared {
  std::vector<RunSetup> setups;
  BenchEnv env;
  Format format = Format::Csv;
  std::string weights_text;
};

// Flag-validation failures map to exit code 2.
bool is_flag_error(Errc e) {
  switch (e) {
    case Errc::ConflictingFlags:
    case Errc::FlagsRequireLinked:
    case Errc::MissingFaultPolicy:
    case Errc::BadArgument:
    case Errc::BadWeights:
      return true;
    default:
      return false;
  }
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SimError(Errc::IoError, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
    throw SimError(Errc::BadArgument, std::string(what) + " '" + std::string(s) + "' is not an unsigned integer");
  }
  return v;
}

Baseline parse_baseline(std::string_view s) {
  if (s == "trap") return Baseline::Trap;
  if (s == "linked" || s == "base") return Baseline::LinkedBase;
  throw SimError(Errc::BadArgument, "baseline must be trap or linked, got '" + std::string(s) + "'");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("BOUNDARY_SIM_SEED"); env && *env) return parse_u64(env, "BOUNDARY_SIM_SEED");
  return 42;
}

Prepared prepare(const Common& c) {
  Prepared p;
  const Baseline base = c.baseline ? parse_baseline(*c.baseline) : Baseline::LinkedBase;
  if (c.configs.empty()) {
    const bool linked = c.baseline && base == Baseline::LinkedBase;
    p.setups.push_back(parse_setup(linked ? "linked" : "trap", base));
  }
  for (const auto& tok : c.configs) p.setups.push_back(parse_setup(tok, base));
  const auto wpath = c.weights_path.empty() ? default_weights_path() : std::filesystem::path(c.weights_path);
  p.weights_text = read_file(wpath);
  p.env.weights = parse_weights(p.weights_text);
  p.env.seed = resolve_seed(c.seed);
  auto f = parse_format(c.format);
  if (!f) throw SimError(Errc::BadArgument, "format must be csv or json");
  p.format = *f;
  return p;
}

void add_common(CLI::App* sub, Common& c, bool with_baseline) {
  sub->add_option("--config", c.configs, "comma-separated config tokens; repeat for several configs");
  if (with_baseline) sub->add_option("--baseline", c.baseline, "trap or linked (default: linked when flags are given, else trap)");
  sub->add_option("--weights", c.weights_path, "weight file");
  sub->add_option("--seed", c.seed, "random seed (default: BOUNDARY_SIM_SEED or 42)");
  sub->add_option("--format", c.format, "csv or json");
  sub->add_option("--output-dir", c.output_dir, "directory for result files");
  sub->add_flag("--plot", c.plot, "also write SVG plots");
}

std::vector<std::filesystem::path> emit(const std::vector<SampleSet>& sets, const Common& c, const Prepared& p,
                                        const std::string& stem, std::size_t discard = 0) {
  EmitOptions o;
  o.format = p.format;
  o.plot = c.plot;
  o.stem = stem;
  o.discard_worst = discard;
  o.weights_text = p.weights_text;
  auto files = emit_report(sets, c.output_dir, o);
  std::cout << summary_csv(sets, discard);
  return files;
}

void print_files(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
}

struct WorkloadSpec {
  enum class Kind { Micro, Pf, Kv, Ring } kind = Kind::Micro;
  MicroOp op = MicroOp::Getppid;
  std::uint64_t payload = 1;
  FaultRegion region = FaultRegion::Stack;
  std::uint64_t n = 0;
};

// micro:<op>[:payload] | pf:<stack|mmap>[:npages] | kv | ring[:rows]
WorkloadSpec parse_workload(std::string_view s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == ':') {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(std::move(cur));
  WorkloadSpec w;
  const auto& head = parts[0];
  if (head == "micro" && parts.size() >= 2 && parts.size() <= 3) {
    auto op = parse_op(parts[1]);
    if (!op) throw SimError(Errc::BadArgument, "unknown op '" + parts[1] + "'");
    w.op = *op;
    if (parts.size() == 3) w.payload = parse_u64(parts[2], "payload");
    if (w.op == MicroOp::Getppid) w.payload = 0;
    return w;
  }
  if (head == "pf" && parts.size() >= 2 && parts.size() <= 3) {
    w.kind = WorkloadSpec::Kind::Pf;
    if (parts[1] == "stack") w.region = FaultRegion::Stack;
    else if (parts[1] == "mmap") w.region = FaultRegion::Mmap;
    else throw SimError(Errc::BadArgument, "unknown region '" + parts[1] + "'");
    w.n = parts.size() == 3 ? parse_u64(parts[2], "npages") : 256;
    return w;
  }
  if (head == "kv" && parts.size() == 1) {
    w.kind = WorkloadSpec::Kind::Kv;
    return w;
  }
  if (head == "ring" && parts.size() <= 2) {
    w.kind = WorkloadSpec::Kind::Ring;
    w.n = parts.size() == 2 ? parse_u64(parts[1], "rows") : 1000;
    return w;
  }
  throw SimError(Errc::BadArgument, "unrecognized workload '" + std::string(s) + "'");
}

SampleSet run_workload(const WorkloadSpec& w, const RunSetup& setup, const BenchEnv& env, std::uint64_t iters) {
  switch (w.kind) {
    case WorkloadSpec::Kind::Micro:
      return run_micro(setup, w.op, w.payload, iters, env).samples;
    case WorkloadSpec::Kind::Pf:
      return run_pagefault_bench(setup, w.n, w.region, env).samples;
    case WorkloadSpec::Kind::Kv:
      return run_kv_bench(setup, KvParams{}, env).samples;
    case WorkloadSpec::Kind::Ring: {
      RingParams rp;
      rp.rows = w.n;
      return run_ring_bench(setup, rp, env).rounds;
    }
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator of the application/kernel boundary"};
  app.require_subcommand(1);

  Common common;

  // micro
  std::vector<std::string> ops{"getppid"};
  std::vector<std::uint64_t> payloads{1};
  std::uint64_t iters = 10000;
  bool payload_sweep = false;
  auto* micro = app.add_subcommand("micro", "syscall microbenchmarks");
  add_common(micro, common, true);
  micro->add_option("--op", ops, "getppid, read, write, sendto or recvfrom; repeatable");
  micro->add_option("--payload", payloads, "payload bytes; repeatable");
  micro->add_flag("--sweep", payload_sweep, "use payloads 1,64,512,4096,8192");
  micro->add_option("--iters", iters, "iterations per cell");

  // pf
  std::vector<std::uint64_t> npages{256};
  std::string region = "stack";
  auto* pf = app.add_subcommand("pf", "page-fault benchmark");
  add_common(pf, common, true);
  pf->add_option("--npages", npages, "fresh pages to touch; repeatable");
  pf->add_option("--region", region, "stack or mmap")->check(CLI::IsMember({"stack", "mmap"}));

  // kv
  KvParams kv_params;
  auto* kv = app.add_subcommand("kv", "key-value server throughput and tail latency");
  add_common(kv, common, true);
  kv->add_option("--clients", kv_params.clients, "client count");
  kv->add_option("--requests", kv_params.requests_per_client, "requests per client");
  kv->add_option("--gets-per-set", kv_params.gets_per_set, "gets issued per set");
  kv->add_option("--think", kv_params.think_time, "client think time in cycles");

  // ring
  RingParams ring_params;
  std::uint32_t runs = 1;
  std::size_t discard = 0;
  auto* ring = app.add_subcommand("ring", "three-node round-barrier workload");
  add_common(ring, common, true);
  ring->add_option("--rows", ring_params.rows, "input rows (one message round each)");
  ring->add_option("--min-message", ring_params.min_message, "smallest message payload");
  ring->add_option("--max-message", ring_params.max_message, "largest message payload");
  ring->add_option("--runs", runs, "repeat with seeds seed..seed+runs-1");
  ring->add_option("--discard", discard, "drop the worst runs from the run-total statistics");

  // sweep
  Cycles sla = 2'000'000;
  std::vector<Cycles> thinks{4'000'000, 2'000'000, 1'000'000, 500'000, 250'000};
  KvParams sweep_params;
  sweep_params.requests_per_client = 200;
  auto* sweep = app.add_subcommand("sweep", "offered-load sweep of the key-value workload under a p99 SLA");
  add_common(sweep, common, true);
  sweep->add_option("--sla", sla, "p99 bound in cycles");
  sweep->add_option("--think", thinks, "client think times; repeatable");
  sweep->add_option("--clients", sweep_params.clients, "client count");
  sweep->add_option("--requests", sweep_params.requests_per_client, "requests per client");

  // compare
  std::string cmp_baseline = "trap";
  std::vector<std::string> against;
  std::string workload = "micro:getppid";
  std::uint64_t cmp_iters = 10000;
  auto* cmp = app.add_subcommand("compare", "improvement of configs over a baseline config");
  add_common(cmp, common, false);
  cmp->add_option("--baseline", cmp_baseline, "baseline config tokens");
  cmp->add_option("--against", against, "config tokens to compare; repeatable")->required();
  cmp->add_option("--workload", workload, "micro:<op>[:payload], pf:<region>[:npages], kv or ring[:rows]");
  cmp->add_option("--iters", cmp_iters, "iterations for micro workloads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: BadArgument: " << e.what() << "\n";
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (micro->parsed()) {
      const Prepared p = prepare(common);
      if (payload_sweep) payloads.assign(kPayloadSweep.begin(), kPayloadSweep.end());
      std::vector<MicroOp> parsed_ops;
      for (const auto& o : ops) {
        auto op = parse_op(o);
        if (!op) throw SimError(Errc::BadArgument, "unknown op '" + o + "'");
        parsed_ops.push_back(*op);
      }
      std::vector<SampleSet> sets;
      for (const auto& s : p.setups) {
        for (MicroOp op : parsed_ops) {
          if (op == MicroOp::Getppid) {
            // getppid moves no data; one cell regardless of payloads.
            sets.push_back(run_micro(s, op, 0, iters, p.env).samples);
            continue;
          }
          for (auto pl : payloads) sets.push_back(run_micro(s, op, pl, iters, p.env).samples);
        }
      }
      print_files(emit(sets, common, p, "micro"));
    } else if (pf->parsed()) {
      const Prepared p = prepare(common);
      const FaultRegion r = region == "mmap" ? FaultRegion::Mmap : FaultRegion::Stack;
      std::vector<SampleSet> sets;
      for (const auto& s : p.setups) {
        for (auto n : npages) sets.push_back(run_pagefault_bench(s, n, r, p.env).samples);
      }
      print_files(emit(sets, common, p, "pf"));
    } else if (kv->parsed()) {
      const Prepared p = prepare(common);
      std::vector<SampleSet> sets;
      std::string table = "config,throughput,elapsed,p99,store_hash\n";
      nlohmann::ordered_json tj = nlohmann::ordered_json::array();
      for (const auto& s : p.setups) {
        const KvReport r = run_kv_bench(s, kv_params, p.env);
        sets.push_back(r.samples);
        table += csv_field(s.label()) + "," + format_number(r.throughput) + "," + std::to_string(r.elapsed) + "," +
                 std::to_string(r.stats.p99) + "," + std::to_string(r.store_hash) + "\n";
        tj.push_back({{"config", s.label()}, {"throughput", r.throughput}, {"elapsed", r.elapsed},
                      {"p99", r.stats.p99}, {"store_hash", r.store_hash}});
      }
      auto files = emit(sets, common, p, "kv");
      const auto tp = std::filesystem::path(common.output_dir) /
                      (p.format == Format::Csv ? "kv_throughput.csv" : "kv_throughput.json");
      write_atomic(tp, p.format == Format::Csv ? table : tj.dump(2) + "\n");
      files.push_back(tp);
      std::cout << table;
      print_files(files);
    } else if (ring->parsed()) {
      const Prepared p = prepare(common);
      std::vector<SampleSet> sets;
      for (const auto& s : p.setups) {
        sets.push_back(run_ring_bench(s, ring_params, p.env).rounds);
      }
      auto files = emit(sets, common, p, "ring");
      if (runs > 1) {
        std::vector<SampleSet> totals;
        for (const auto& s : p.setups) totals.push_back(run_ring_repeated(s, ring_params, runs, p.env));
        auto more = emit(totals, common, p, "ring_totals", discard);
        files.insert(files.end(), more.begin(), more.end());
      }
      print_files(files);
    } else if (sweep->parsed()) {
      const Prepared p = prepare(common);
      std::string table = "config,offered,throughput,p99,within_sla\n";
      nlohmann::ordered_json tj = nlohmann::ordered_json::array();
      for (const auto& s : p.setups) {
        const LoadSweepReport r = run_kv_load_sweep(s, sweep_params, sla, thinks, p.env);
        nlohmann::ordered_json pts = nlohmann::ordered_json::array();
        for (const auto& pt : r.points) {
          table += csv_field(s.label()) + "," + format_number(pt.offered) + "," + format_number(pt.throughput) + "," +
                   std::to_string(pt.p99) + "," + (pt.p99 <= sla ? "1" : "0") + "\n";
          pts.push_back({{"offered", pt.offered}, {"throughput", pt.throughput}, {"p99", pt.p99}});
        }
        tj.push_back({{"config", s.label()}, {"sla", sla}, {"max_load_within_sla", r.max_load_within_sla},
                      {"points", pts}});
        std::cout << s.label() << ": max load within SLA " << format_number(r.max_load_within_sla) << "\n";
      }
      const auto out = std::filesystem::path(common.output_dir) /
                       (p.format == Format::Csv ? "sweep.csv" : "sweep.json");
      write_atomic(out, p.format == Format::Csv ? table : tj.dump(2) + "\n");
      write_atomic(std::filesystem::path(common.output_dir) / "weights.txt", p.weights_text);
      std::cout << table;
      print_files({out});
    } else if (cmp->parsed()) {
      common.configs = against;
      const Prepared p = prepare(common);
      const RunSetup base = parse_setup(cmp_baseline, Baseline::LinkedBase);
      const WorkloadSpec w = parse_workload(workload);
      const SampleSet b = run_workload(w, base, p.env, cmp_iters);
      std::vector<Comparison> rows;
      std::vector<SampleSet> sets{b};
      for (const auto& s : p.setups) {
        sets.push_back(run_workload(w, s, p.env, cmp_iters));
        rows.push_back(compare(b, sets.back()));
      }
      const std::string body = p.format == Format::Csv ? comparison_csv(rows) : comparison_json(rows);
      const auto out = std::filesystem::path(common.output_dir) /
                       (p.format == Format::Csv ? "compare.csv" : "compare.json");
      write_atomic(out, body);
      EmitOptions o;
      o.format = p.format;
      o.plot = common.plot;
      o.stem = "compare";
      o.weights_text = p.weights_text;
      auto files = emit_report(sets, common.output_dir, o);
      files.insert(files.begin(), out);
      std::cout << body;
      print_files(files);
    }
  } catch (const SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_flag_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "wall time " << secs << " s\n";
  return 0;
}
