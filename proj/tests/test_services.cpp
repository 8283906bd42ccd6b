#include "bsim/simulator.hpp"
#include "support.hpp"

using namespace bsim;
using bsim::testing::cfg;
using bsim::testing::error_of;
using E = CostEvent;

namespace {

Bytes pattern(std::size_t n, Byte seed) {
  Bytes b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<Byte>(seed + i * 7);
  return b;
}

ServiceArgs write_args(int fd, Bytes data) {
  ServiceArgs a;
  a.fd = fd;
  a.length = data.size();
  a.data = std::move(data);
  return a;
}

}  // namespace

TEST_CASE("descriptors take the lowest free number from 3") {
  FdTable t;
  CHECK(t.install({1}) == 3);
  CHECK(t.install({2}) == 4);
  CHECK(t.install({3}) == 5);
  t.close(4);
  CHECK(t.install({4}) == 4);
  CHECK(t.get(4).socket == 4);
  CHECK(error_of([&] { t.close(9); }) == Errc::BadFd);
  CHECK(error_of([&] { t.get(0); }) == Errc::BadFd);
}

TEST_CASE("a full-path write walks every dispatch layer") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& a = n.spawn_process({}, {});
  auto& b = n.spawn_process({}, {});
  const auto [fa, fb] = sim.socket_pair_over_loopback(a, b);
  const auto before = n.ledger().counts();
  const auto r = n.invoke_service(a, ServiceId::Write, write_args(fa, {0x42}));
  CHECK(r.value == 1);
  const auto d = n.ledger().counts() - before;
  CHECK(d[E::DispatchLayer] == 5);
  CHECK(d[E::CopyByte] == 1);
  sim.settle();
  CHECK(n.socket_for(b, fb).rx_buffer.size() == 1);
}

TEST_CASE("shortcut calls reach the transport directly") {
  Simulator sim;
  Node& n = sim.add_node(cfg(""));
  auto& app = n.launch_linked_app({}, "");
  auto& peer = n.spawn_process({}, {});
  const auto [fa, fb] = sim.socket_pair_over_loopback(app, peer);
  const Bytes msg = pattern(24, 1);

  const auto before = n.ledger().counts();
  CHECK(n.shortcut_send(app, fa, msg).value == 24);
  CHECK(n.ledger().counts() - before == EventCounts{{E::CopyByte, 24}});
  CHECK(app.mode == ExecMode::Application);

  sim.settle();
  const auto got = n.invoke_service(peer, ServiceId::Read, [&] {
    ServiceArgs a;
    a.fd = fb;
    a.length = 100;
    return a;
  }());
  CHECK(got.data == msg);

  CHECK(error_of([&] { n.shortcut_send(peer, fb, msg); }) == Errc::ShortcutOnTrapProcess);
  CHECK(error_of([&] { n.shortcut_recv(app, fa, 4); }) == Errc::WouldBlock);
}

TEST_CASE("streams deliver bytes in order across nodes") {
  Simulator sim;
  Node& n0 = sim.add_node(cfg("trap"));
  Node& n1 = sim.add_node(cfg("byp,ret"));
  const Bytes data = pattern(200'000, 3);  // larger than the receive window
  Bytes received;
  int fd_w = -1;
  int fd_r = -1;
  auto& writer = n0.spawn_process(
      [&](TaskApi api) -> Program {
        std::size_t off = 0;
        while (off < data.size()) {
          const std::size_t len = std::min<std::size_t>(7000, data.size() - off);
          const auto r = co_await api.write(fd_w, Bytes(data.begin() + off, data.begin() + off + len));
          off += static_cast<std::size_t>(r.value);
        }
        co_await api.close(fd_w);
      },
      {});
  auto& reader = n1.launch_linked_app(
      [&](TaskApi api) -> Program {
        for (;;) {
          const auto r = co_await api.read(fd_r, 5000);
          if (r.value == 0) break;
          received.insert(received.end(), r.data.begin(), r.data.end());
        }
      },
      "");
  std::tie(fd_w, fd_r) = sim.socket_pair_over_loopback(writer, reader);
  REQUIRE(sim.run().finished);
  CHECK(received == data);
}

TEST_CASE("run-to-completion receive polls instead of sleeping") {
  for (bool rtc : {false, true}) {
    CAPTURE(rtc);
    Simulator sim;
    Node& n0 = sim.add_node(cfg(""));
    Node& n1 = sim.add_node(cfg("trap"));
    int fa = -1;
    int fb = -1;
    Bytes got;
    auto& app = n0.launch_linked_app(
        [&](TaskApi api) -> Program {
          api.set_kernel_execution(rtc);
          const auto r = co_await api.shortcut_recv(fa, 16);
          got = r.data;
        },
        "");
    auto& peer = n1.spawn_process(
        [&](TaskApi api) -> Program {
          co_await api.compute(50'000);
          co_await api.write(fb, pattern(16, 9));
        },
        {});
    std::tie(fa, fb) = sim.socket_pair_over_loopback(app, peer);
    REQUIRE(sim.run().finished);
    CHECK(got == pattern(16, 9));
    CHECK(n0.ledger().count(E::SchedWakeup) == (rtc ? 0 : 1));
    CHECK(n0.ledger().count(E::SchedSleep) == (rtc ? 0 : 1));
  }
}

TEST_CASE("without nodelay small writes coalesce behind the unacknowledged segment") {
  for (bool nodelay : {true, false}) {
    CAPTURE(nodelay);
    Simulator sim;
    Node& n = sim.add_node(cfg("trap"));
    auto& a = n.spawn_process({}, {});
    auto& b = n.spawn_process({}, {});
    const auto [fa, fb] = sim.socket_pair_over_loopback(a, b, nodelay);
    for (Byte i = 0; i < 3; ++i) n.invoke_service(a, ServiceId::Write, write_args(fa, {i}));
    const StreamSocket& s = n.socket_for(a, fa);
    CHECK(s.segments_sent == (nodelay ? 3 : 1));
    sim.settle();
    CHECK(s.segments_sent == (nodelay ? 3 : 2));
    CHECK(n.socket_for(b, fb).rx_buffer == std::deque<Byte>{0, 1, 2});
  }
}

TEST_CASE("closed peers") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& a = n.spawn_process({}, {});
  auto& b = n.spawn_process({}, {});
  const auto [fa, fb] = sim.socket_pair_over_loopback(a, b);
  ServiceArgs c;
  c.fd = fb;
  n.invoke_service(b, ServiceId::Close, c);
  CHECK(error_of([&] { n.invoke_service(a, ServiceId::Write, write_args(fa, {1})); }) == Errc::PeerClosed);
  CHECK(error_of([&] { n.invoke_service(b, ServiceId::Close, c); }) == Errc::BadFd);
  sim.settle();
  ServiceArgs r;
  r.fd = fa;
  r.length = 8;
  CHECK(n.invoke_service(a, ServiceId::Read, r).value == 0);
}

TEST_CASE("poll reports readable descriptors") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& a = n.spawn_process({}, {});
  auto& b = n.spawn_process({}, {});
  auto& c = n.spawn_process({}, {});
  const auto [ab, ba] = sim.socket_pair_over_loopback(a, b);
  const auto [ac, ca] = sim.socket_pair_over_loopback(a, c);
  ServiceArgs p;
  p.fds = {ab, ac};
  CHECK(error_of([&] { n.invoke_service(a, ServiceId::Poll, p); }) == Errc::WouldBlock);
  n.invoke_service(c, ServiceId::Write, write_args(ca, {5}));
  sim.settle();
  const auto r = n.invoke_service(a, ServiceId::Poll, p);
  CHECK(r.value == 1);
  CHECK(r.ready == std::vector<int>{ac});
  CHECK(error_of([&] { n.invoke_service(a, ServiceId::Poll, ServiceArgs{}); }) == Errc::BadArgument);
  (void)ba;
}

TEST_CASE("nanosleep wakes at its deadline") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  Cycles woke = 0;
  Cycles asked = 0;
  n.spawn_process(
      [&](TaskApi api) -> Program {
        asked = api.now();
        co_await api.nanosleep(1'000'000);
        woke = api.now();
      },
      {});
  REQUIRE(sim.run().finished);
  CHECK(woke >= asked + 1'000'000);
}

TEST_CASE("getppid returns the parent") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& parent = n.spawn_process({}, {});
  auto& child = n.spawn_process({}, {}, parent.task_id);
  CHECK(n.invoke_service(child, ServiceId::Getppid, {}).value == parent.task_id);
  CHECK(n.invoke_service(parent, ServiceId::Getppid, {}).value == 0);
}
