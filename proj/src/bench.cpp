// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <random>

#include "bsim/bench.hpp"
#include "bsim/error.hpp"
#include "bsim/simulator.hpp"

namespace bsim {

namespace {

constexpr std::uint64_t kUnlimitedBypass = std::numeric_limits<std::uint64_t>::max() / 2;

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<Byte>(rng() & 0xff);
  return out;
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<Byte>(v >> (8 * i)));
}

std::uint64_t get_u64(const Bytes& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[at + i]} << (8 * i);
  return v;
}

TaskControlBlock& start_app(Node& node, AppEntry entry, std::string_view name) {
  if (node.config().linked()) {
    return node.launch_linked_app(std::move(entry), "console=ttyS0 -- " + std::string(name));
  }
  return node.spawn_process(std::move(entry), {std::string(name)});
}

// Sends all of `data`, looping over short writes.
Program send_all(TaskApi api, int fd, Bytes data, bool shortcut) {
  std::size_t off = 0;
  while (off < data.size()) {
    Bytes chunk(data.begin() + static_cast<std::ptrdiff_t>(off), data.end());
    ServiceResult r;
    if (shortcut) {
      r = co_await api.shortcut_send(fd, std::move(chunk));
    } else {
      r = co_await api.write(fd, std::move(chunk));
    }
    off += static_cast<std::size_t>(r.value);
  }
}

// Reads exactly n bytes into `out`; `eof` is set if the stream ends first.
Program recv_exact(TaskApi api, int fd, std::size_t n, bool shortcut, Bytes& out, bool& eof) {
  out.clear();
  eof = false;
  while (out.size() < n) {
    ServiceResult r;
    if (shortcut) {
      r = co_await api.shortcut_recv(fd, n - out.size());
    } else {
      r = co_await api.read(fd, n - out.size());
    }
    if (r.value == 0) {
      eof = true;
      co_return;
    }
    out.insert(out.end(), r.data.begin(), r.data.end());
  }
}

ServiceId service_for(MicroOp op) {
  switch (op) {
    case MicroOp::Getppid: return ServiceId::Getppid;
    case MicroOp::Read: return ServiceId::Read;
    case MicroOp::Write: return ServiceId::Write;
    case MicroOp::SendTo: return ServiceId::SendTo;
    case MicroOp::RecvFrom: return ServiceId::RecvFrom;
  }
  return ServiceId::Getppid;
}

}  // namespace

std::string_view op_name(MicroOp op) noexcept {
  switch (op) {
    case MicroOp::Getppid: return "getppid";
    case MicroOp::Read: return "read";
    case MicroOp::Write: return "write";
    case MicroOp::SendTo: return "sendto";
    case MicroOp::RecvFrom: return "recvfrom";
  }
  return "?";
}

std::optional<MicroOp> parse_op(std::string_view name) noexcept {
  for (MicroOp op : kAllMicroOps) {
    if (op_name(op) == name) return op;
  }
  return std::nullopt;
}

std::string_view region_name(FaultRegion r) noexcept { return r == FaultRegion::Stack ? "stack" : "mmap"; }

void OutputHash::add(const void* data, std::size_t n) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h_ ^= p[i];
    h_ *= 0x100000001b3ull;
  }
}

void OutputHash::add_u64(std::uint64_t v) noexcept {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  add(b, 8);
}

// ---------------------------------------------------------------------------

MicroReport run_micro(const RunSetup& setup, MicroOp op, std::uint64_t payload, std::uint64_t iters,
                      const BenchEnv& env) {
  if (payload == 0 && op != MicroOp::Getppid) {
    throw SimError(Errc::BadArgument, "a zero payload is only valid for getppid");
  }
  if (iters == 0) throw SimError(Errc::BadArgument, "iterations must be positive");

  Simulator sim(env.weights);
  Node& node = sim.add_node(setup.config);
  Node& far = sim.add_node(make_config({}));
  TaskControlBlock& app = start_app(node, nullptr, "micro");
  TaskControlBlock& peer = far.spawn_process(nullptr, {"peer"});
  const auto [fd, peer_fd] = sim.socket_pair_over_loopback(app, peer);
  const SocketId own = app.files->get(fd).socket;
  const SocketId other = peer.files->get(peer_fd).socket;
  if (setup.config.byp()) node.set_bypass(app, kUnlimitedBypass);

  const bool receive = op == MicroOp::Read || op == MicroOp::RecvFrom;
  const bool shortcut = setup.app.shortcut && op != MicroOp::Getppid;
  std::mt19937_64 rng(env.seed);

  MicroReport rep;
  rep.samples.workload = "micro:" + std::string(op_name(op)) + ":" + std::to_string(payload);
  rep.samples.config = setup.label();
  rep.samples.values.reserve(iters);
  OutputHash h;

  for (std::uint64_t i = 0; i < iters; ++i) {
    Bytes data = op == MicroOp::Getppid ? Bytes{} : random_bytes(rng, payload);
    if (receive) sim.inject(own, data);

    const Cycles before = ledger_cycles(node.ledger());
    ServiceResult r;
    if (shortcut) {
      r = receive ? node.shortcut_recv(app, fd, payload) : node.shortcut_send(app, fd, std::move(data));
    } else {
      ServiceArgs a;
      a.fd = fd;
      a.length = payload;
      if (!receive) a.data = std::move(data);
      r = node.invoke_service(app, service_for(op), std::move(a));
    }
    rep.samples.values.push_back(ledger_cycles(node.ledger()) - before);

    h.add_u64(static_cast<std::uint64_t>(r.value));
    h.add(r.data.data(), r.data.size());
    sim.settle();
    if (!receive && op != MicroOp::Getppid) {
      const auto& buf = sim.socket(other).rx_buffer;
      for (Byte b : buf) h.add(&b, 1);
      sim.drain(other);
      sim.settle();
    }
  }
  rep.output_hash = h.value();
  return rep;
}

PageFaultReport run_pagefault_bench(const RunSetup& setup, std::uint64_t npages, FaultRegion region,
                                    const BenchEnv& env) {
  if (npages == 0) throw SimError(Errc::BadArgument, "npages must be positive");
  Simulator sim(env.weights);
  Node& node = sim.add_node(setup.config);
  TaskControlBlock& t = start_app(node, nullptr, "pf");

  PageFaultReport rep;
  rep.samples.workload = "pf:" + std::string(region_name(region)) + ":" + std::to_string(npages);
  rep.samples.config = setup.label();
  rep.samples.values.reserve(npages);

  auto one = [&](std::uint64_t addr) {
    const Cycles before = ledger_cycles(node.ledger());
    const FaultOutcome o = node.touch_page(t, addr);
    if (!o.faulted) throw SimError(Errc::BadArgument, "page was already present");
    rep.samples.values.push_back(ledger_cycles(node.ledger()) - before);
  };

  if (region == FaultRegion::Mmap) {
    const Vma v = node.mmap_region(t, npages * kPageSize, VmaKind::Mmap);
    for (PageNo p = v.start; p < v.end; ++p) one(p * kPageSize);
  } else {
    for (std::uint64_t i = 0; i < npages; ++i) one(node.next_stack_page(t));
  }
  rep.output_hash = t.mm->page_map_hash();
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kKvRequest = 17;  // op, key, value
constexpr std::size_t kKvReply = 9;     // status, value
constexpr Byte kOpGet = 'g';
constexpr Byte kOpSet = 's';

struct KvState {
  std::map<std::uint64_t, std::uint64_t> store;
  std::vector<int> server_fds;
  std::vector<int> client_fds;
  std::vector<std::vector<Cycles>> latencies;
  std::vector<OutputHash> replies;
  std::vector<Cycles> finish;
};

Bytes kv_apply(KvState& st, const Bytes& req) {
  const std::uint64_t key = get_u64(req, 1);
  Bytes reply;
  if (req[0] == kOpSet) {
    st.store[key] = get_u64(req, 9);
    reply.push_back(1);
    put_u64(reply, 0);
  } else {
    auto it = st.store.find(key);
    reply.push_back(it == st.store.end() ? 0 : 1);
    put_u64(reply, it == st.store.end() ? 0 : it->second);
  }
  return reply;
}

}  // namespace

KvReport run_kv_bench(const RunSetup& setup, const KvParams& params, const BenchEnv& env) {
  if (params.clients == 0) throw SimError(Errc::BadArgument, "at least one client is required");
  if (params.keys_per_client == 0) throw SimError(Errc::BadArgument, "keys_per_client must be positive");

  auto st = std::make_unique<KvState>();
  st->latencies.resize(params.clients);
  st->replies.resize(params.clients);
  st->finish.resize(params.clients);

  Simulator sim(env.weights);
  Node& server = sim.add_node(setup.config);
  const bool byp = setup.config.byp();
  const bool shortcut = setup.app.shortcut;
  const bool rtc = setup.app.run_to_completion;

  // Single-threaded event loop: wait for readable connections, answer each
  // complete request, drop connections at end of stream.
  TaskControlBlock& server_main = start_app(server, [&st, &params, byp, shortcut, rtc](TaskApi api) -> Program {
    if (byp) api.set_bypass(kUnlimitedBypass);
    if (rtc) api.set_kernel_execution(true);
    std::vector<int> open = st->server_fds;
    std::map<int, Bytes> partial;
    while (!open.empty()) {
      const ServiceResult ready = co_await api.poll(open);
      for (int fd : ready.ready) {
        Bytes& buf = partial[fd];
        ServiceResult r;
        if (shortcut) {
          r = co_await api.shortcut_recv(fd, kKvRequest - buf.size());
        } else {
          r = co_await api.read(fd, kKvRequest - buf.size());
        }
        if (r.value == 0) {
          co_await api.close(fd);
          open.erase(std::find(open.begin(), open.end(), fd));
          continue;
        }
        buf.insert(buf.end(), r.data.begin(), r.data.end());
        if (buf.size() < kKvRequest) continue;
        if (params.service_compute > 0) co_await api.compute(params.service_compute);
        co_await send_all(api, fd, kv_apply(*st, buf), shortcut);
        buf.clear();
      }
    }
  }, "kv-server");

  for (std::uint32_t c = 0; c < params.clients; ++c) {
    Node& n = sim.add_node(make_config({}));
    TaskControlBlock& client = n.spawn_process([&st, &params, c, seed = env.seed](TaskApi api) -> Program {
      std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + c + 1);
      const int fd = st->client_fds[c];
      Bytes reply;
      bool eof = false;
      for (std::uint64_t i = 0; i < params.requests_per_client; ++i) {
        const bool set = i % (std::uint64_t{params.gets_per_set} + 1) == 0;
        Bytes req{set ? kOpSet : kOpGet};
        put_u64(req, std::uint64_t{c} * params.keys_per_client + rng() % params.keys_per_client);
        put_u64(req, rng());
        const Cycles t0 = api.now();
        co_await send_all(api, fd, std::move(req), false);
        co_await recv_exact(api, fd, kKvReply, false, reply, eof);
        if (eof) throw SimError(Errc::PeerClosed, "server closed the connection");
        st->latencies[c].push_back(api.now() - t0);
        st->replies[c].add(reply.data(), reply.size());
        if (params.think_time > 0) co_await api.compute(params.think_time);
      }
      st->finish[c] = api.now();
      co_await api.close(fd);
    }, {"kv-client"});
    const auto [sfd, cfd] = sim.socket_pair_over_loopback(server_main, client);
    st->server_fds.push_back(sfd);
    st->client_fds.push_back(cfd);
  }

  const RunResult rr = sim.run();
  if (!rr.finished) throw SimError(Errc::Stalled, "kv run did not finish");

  KvReport rep;
  rep.samples.workload = "kv";
  rep.samples.config = setup.label();
  for (const auto& l : st->latencies) rep.samples.values.insert(rep.samples.values.end(), l.begin(), l.end());
  rep.stats = summarize(rep.samples);
  rep.elapsed = *std::max_element(st->finish.begin(), st->finish.end());
  const double total = static_cast<double>(params.clients) * static_cast<double>(params.requests_per_client);
  rep.throughput = rep.elapsed == 0 ? 0 : total * 1e6 / static_cast<double>(rep.elapsed);

  OutputHash store;
  for (const auto& [k, v] : st->store) {
    store.add_u64(k);
    store.add_u64(v);
  }
  rep.store_hash = store.value();
  OutputHash out;
  for (const auto& r : st->replies) out.add_u64(r.value());
  out.add_u64(rep.store_hash);
  rep.output_hash = out.value();
  return rep;
}

LoadSweepReport run_kv_load_sweep(const RunSetup& setup, KvParams params, Cycles sla,
                                  const std::vector<Cycles>& think_times, const BenchEnv& env) {
  std::vector<Cycles> order = think_times;
  std::sort(order.begin(), order.end(), std::greater<>());
  LoadSweepReport rep;
  for (Cycles think : order) {
    if (think == 0) throw SimError(Errc::BadArgument, "think times must be positive");
    params.think_time = think;
    const KvReport r = run_kv_bench(setup, params, env);
    LoadPoint p;
    p.offered = static_cast<double>(params.clients) * 1e6 / static_cast<double>(think);
    p.throughput = r.throughput;
    p.p99 = r.stats.p99;
    if (p.p99 <= sla) rep.max_load_within_sla = std::max(rep.max_load_within_sla, p.offered);
    rep.points.push_back(p);
  }
  return rep;
}

// ---------------------------------------------------------------------------

RingReport run_ring_bench(const RunSetup& setup, const RingParams& params, const BenchEnv& env) {
  if (params.rows == 0) throw SimError(Errc::BadArgument, "rows must be positive");
  if (params.min_message == 0 || params.min_message > params.max_message || params.max_message > 255) {
    throw SimError(Errc::BadArgument, "message sizes must satisfy 1 <= min <= max <= 255");
  }
  if (params.burst_min > params.burst_max) throw SimError(Errc::BadArgument, "burst_min exceeds burst_max");

  constexpr std::size_t kNodes = 3;
  struct RingState {
    std::array<int, kNodes> next_fd{};
    std::array<int, kNodes> prev_fd{};
    std::array<Cycles, kNodes> finish{};
    std::array<OutputHash, kNodes> received;
    std::vector<Cycles> rounds;
  };
  auto st = std::make_unique<RingState>();

  Simulator sim(env.weights);
  NodeOptions opts;
  opts.timeslice = params.timeslice;
  const bool byp = setup.config.byp();
  const bool shortcut = setup.app.shortcut;
  const bool rtc = setup.app.run_to_completion;

  std::array<TaskControlBlock*, kNodes> apps{};
  for (std::size_t i = 0; i < kNodes; ++i) {
    Node& n = sim.add_node(setup.config, opts);
    apps[i] = &start_app(n, [&st, &params, i, byp, shortcut, rtc, seed = env.seed](TaskApi api) -> Program {
      if (rtc) api.set_kernel_execution(true);
      if (byp) api.set_bypass(kUnlimitedBypass);
      std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 101 + i);
      std::uniform_int_distribution<std::uint32_t> size(params.min_message, params.max_message);
      Bytes header;
      Bytes body;
      bool eof = false;
      for (std::uint64_t row = 0; row < params.rows; ++row) {
        const Cycles t0 = api.now();
        co_await api.compute(params.row_compute);
        const std::uint32_t len = size(rng);
        Bytes msg{static_cast<Byte>(len)};
        const Bytes payload = random_bytes(rng, len);
        msg.insert(msg.end(), payload.begin(), payload.end());
        co_await send_all(api, st->next_fd[i], std::move(msg), shortcut);
        co_await recv_exact(api, st->prev_fd[i], 1, shortcut, header, eof);
        if (eof) throw SimError(Errc::PeerClosed, "ring neighbour closed");
        co_await recv_exact(api, st->prev_fd[i], header[0], shortcut, body, eof);
        if (eof) throw SimError(Errc::PeerClosed, "ring neighbour closed");
        st->received[i].add(header.data(), 1);
        st->received[i].add(body.data(), body.size());
        if (i == 0) st->rounds.push_back(api.now() - t0);
      }
      st->finish[i] = api.now();
    }, "ring");

    TaskControlBlock& d = n.spawn_process([&params, i, seed = env.seed](TaskApi api) -> Program {
      std::mt19937_64 rng(seed * 0xd1b54a32d192ed03ull + 7 + i);
      std::uniform_int_distribution<Cycles> burst(params.burst_min, params.burst_max);
      for (;;) {
        co_await api.compute(burst(rng));
        co_await api.yield();
      }
    }, {"daemon"});
    d.daemon = true;
  }
  for (std::size_t i = 0; i < kNodes; ++i) {
    const auto [a, b] = sim.socket_pair_over_loopback(*apps[i], *apps[(i + 1) % kNodes]);
    st->next_fd[i] = a;
    st->prev_fd[(i + 1) % kNodes] = b;
  }

  const RunResult rr = sim.run();
  if (!rr.finished) throw SimError(Errc::Stalled, "ring run did not finish");

  RingReport rep;
  rep.rounds.workload = "ring:" + std::to_string(params.rows);
  rep.rounds.config = setup.label();
  rep.rounds.values = std::move(st->rounds);
  rep.stats = summarize(rep.rounds);
  rep.total_cycles = *std::max_element(st->finish.begin(), st->finish.end());
  OutputHash out;
  for (const auto& h : st->received) out.add_u64(h.value());
  rep.output_hash = out.value();
  return rep;
}

SampleSet run_ring_repeated(const RunSetup& setup, const RingParams& params, std::uint32_t runs,
                            const BenchEnv& env) {
  SampleSet s;
  s.workload = "ring-total:" + std::to_string(params.rows);
  s.config = setup.label();
  for (std::uint32_t i = 0; i < runs; ++i) {
    BenchEnv e = env;
    e.seed = env.seed + i;
    s.values.push_back(run_ring_bench(setup, params, e).total_cycles);
  }
  return s;
}

}  // namespace bsim
