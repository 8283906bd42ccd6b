#include <deque>

#include "bsim/simulator.hpp"
#include "support.hpp"

using namespace bsim;
using bsim::testing::cfg;
using bsim::testing::error_of;

namespace {

Program spin(TaskApi api) {
  for (int i = 0; i < 3; ++i) {
    co_await api.compute(100 + api.id());
    co_await api.getppid();
    co_await api.yield();
  }
}

}  // namespace

TEST_CASE("run queue picks the head and requeues the current task") {
  RunQueue rq;
  rq.set_current(1);
  rq.push_ready(2);
  rq.push_ready(3);
  CHECK(rq.pick_next(true) == 2);
  CHECK(rq.ready() == std::deque<TaskId>{3, 1});
  CHECK(rq.pick_next(false) == 3);
  CHECK(rq.ready() == std::deque<TaskId>{1});
  CHECK(rq.remove_ready(1));
  CHECK_FALSE(rq.remove_ready(1));
  CHECK(rq.pick_next(false) == kIdleTask);
}

TEST_CASE("round robin on a node") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  for (int i = 0; i < 3; ++i) n.spawn_process({}, {});
  CHECK(n.schedule() == 1);
  CHECK(n.schedule() == 2);
  CHECK(n.run_queue().ready() == std::deque<TaskId>{3, 1});
  CHECK(n.task(2).state == TaskState::Running);
  CHECK(n.task(1).state == TaskState::Ready);
  CHECK(n.switch_trace().back() == SwitchRecord{n.clock(), 1, 2, true});
}

TEST_CASE("an empty node idles") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  CHECK(n.schedule() == kIdleTask);
  CHECK(n.switch_trace().empty());
}

TEST_CASE("wait queues wake in FIFO order and charge both sides") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& a = n.spawn_process({}, {});
  auto& b = n.spawn_process({}, {});
  WaitQueue wq{"test", {}};
  const auto before = n.ledger().counts();
  n.block_on(a, wq);
  n.block_on(b, wq);
  CHECK(a.state == TaskState::Blocked);
  CHECK(a.blocked_on == &wq);
  CHECK_FALSE(n.run_queue().has_ready());
  n.wake_one(wq);
  CHECK(a.state == TaskState::Ready);
  CHECK(b.state == TaskState::Blocked);
  CHECK(n.run_queue().ready() == std::deque<TaskId>{a.task_id});
  n.wake_one(wq);
  n.wake_one(wq);
  CHECK(n.ledger().counts() - before ==
        EventCounts{{CostEvent::SchedSleep, 2}, {CostEvent::SchedWakeup, 2}});
}

TEST_CASE("kernel execution suppresses preemption at exit") {
  Simulator sim;
  Node& n = sim.add_node(cfg(""));
  auto& app = n.launch_linked_app({}, "");
  auto& other = n.spawn_process({}, {});
  REQUIRE(n.schedule() == app.task_id);

  n.set_kernel_execution(app, true);
  app.need_resched = true;
  n.invoke_service(app, ServiceId::Getppid, {});
  CHECK(n.run_queue().current() == app.task_id);
  CHECK(app.need_resched);

  n.set_kernel_execution(app, false);
  n.invoke_service(app, ServiceId::Getppid, {});
  CHECK(n.run_queue().current() == other.task_id);
  CHECK_FALSE(n.switch_trace().back().voluntary);

  CHECK(error_of([&] { n.set_kernel_execution(other, true); }) == Errc::KernelExecOnTrapProcess);
}

TEST_CASE("timeslice expiry marks the task for rescheduling") {
  Simulator sim;
  NodeOptions o;
  o.timeslice = 1000;
  Node& n = sim.add_node(cfg("trap"), o);
  auto& a = n.spawn_process({}, {});
  n.spawn_process({}, {});
  REQUIRE(n.schedule() == a.task_id);
  n.invoke_service(a, ServiceId::Getppid, {});  // well past 1000 cycles
  CHECK(n.run_queue().current() != a.task_id);
}

TEST_CASE("clone copies the initial state from where the entry code left it") {
  SUBCASE("base") {
    Simulator sim;
    Node& n = sim.add_node(cfg(""));
    auto& p = n.launch_linked_app({}, "");
    auto& c = n.clone_task(p, kCloneVm | kCloneUkl, {});
    CHECK(c.initial_state_source == StackKind::KernelPinned);
    CHECK(c.initial_state_valid);
    CHECK(c.parent_id == p.task_id);
    CHECK(c.mm == p.mm);
    CHECK(c.files == p.files);
    CHECK(c.path_kind == PathKind::LinkedApp);
  }
  SUBCASE("nss") {
    Simulator sim;
    Node& n = sim.add_node(cfg("nss,pf_df"));
    auto& p = n.launch_linked_app({}, "");
    CHECK(n.clone_task(p, kCloneUkl, {}).initial_state_source == StackKind::UserDemandPaged);
    auto& stale = n.clone_task(p, kCloneVm, {});
    CHECK(stale.initial_state_source == StackKind::KernelPinned);
    CHECK_FALSE(stale.initial_state_valid);
  }
  SUBCASE("nss_ps") {
    Simulator sim;
    Node& n = sim.add_node(cfg("nss_ps,pf_ss"));
    auto& p = n.launch_linked_app({}, "");
    CHECK(n.clone_task(p, kCloneUkl, {}).initial_state_source == StackKind::NssPinnedUser);
  }
}

TEST_CASE("signals") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& t = n.spawn_process({}, {});
  n.deliver_signal(t, 3);
  n.deliver_signal(t, 5);
  n.invoke_service(t, ServiceId::Getppid, {});
  CHECK(t.delivered_signals == std::vector<SignalDelivery>{{3, 1}, {5, 1}});

  WaitQueue wq{"test", {}};
  n.block_on(t, wq);
  n.deliver_signal(t, 9);
  CHECK(t.state == TaskState::Ready);
  CHECK(wq.waiters.empty());
  CHECK(t.call.woken_by_signal);
}

TEST_CASE("scheduling is deterministic") {
  auto trace = [] {
    Simulator sim;
    NodeOptions o;
    o.timeslice = 5000;
    Node& n = sim.add_node(cfg("trap"), o);
    for (int i = 0; i < 4; ++i) n.spawn_process(spin, {});
    REQUIRE(sim.run().finished);
    return std::pair{n.switch_trace(), n.ledger().counts()};
  };
  const auto a = trace();
  const auto b = trace();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.size() > 4);
}
