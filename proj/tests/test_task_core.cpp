#include <set>

#include "bsim/simulator.hpp"
#include "support.hpp"

using namespace bsim;
using bsim::testing::cfg;
using bsim::testing::error_of;

TEST_CASE("kernel command line after -- becomes the app's argv") {
  Simulator sim;
  Node& n = sim.add_node(cfg(""));
  auto& t = n.launch_linked_app({}, "sim.opts -- port=7000");
  CHECK(t.cmdline == std::vector<std::string>{"port=7000"});
  CHECK(t.path_kind == PathKind::LinkedApp);
  CHECK(n.linked_app() == t.task_id);
}

TEST_CASE("argument splitting") {
  Simulator sim;
  CHECK(sim.add_node(cfg("")).launch_linked_app({}, "x -- a b c").cmdline ==
        std::vector<std::string>{"a", "b", "c"});
  CHECK(sim.add_node(cfg("")).launch_linked_app({}, "quiet").cmdline.empty());
  CHECK(sim.add_node(cfg("")).launch_linked_app({}, "x -- \"a b\"  c").cmdline ==
        std::vector<std::string>{"a b", "c"});
  Node& bad = sim.add_node(cfg(""));
  CHECK(error_of([&] { bad.launch_linked_app({}, "x -- \"open"); }) == Errc::BadCmdline);
  CHECK_FALSE(bad.linked_app().has_value());
}

TEST_CASE("one linked application per node") {
  Simulator sim;
  Node& n = sim.add_node(cfg("byp"));
  n.launch_linked_app({}, "");
  CHECK(error_of([&] { n.launch_linked_app({}, ""); }) == Errc::SecondLinkedApp);
}

TEST_CASE("spawned processes get distinct ids and their own address spaces") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  std::set<TaskId> ids;
  std::set<const AddressSpace*> spaces;
  for (int i = 0; i < 300; ++i) {
    auto& t = n.spawn_process({}, {"p" + std::to_string(i)});
    ids.insert(t.task_id);
    spaces.insert(t.mm.get());
    CHECK(t.path_kind == PathKind::TrapProcess);
    CHECK(t.state == TaskState::Ready);
  }
  CHECK(ids.size() == 300);
  CHECK(spaces.size() == 300);
  CHECK(ids.count(kIdleTask) == 0);
}

TEST_CASE("task cap") {
  Simulator sim;
  NodeOptions o;
  o.task_cap = 4;
  Node& n = sim.add_node(cfg("trap"), o);
  for (int i = 0; i < 4; ++i) n.spawn_process({}, {});
  CHECK(error_of([&] { n.spawn_process({}, {}); }) == Errc::TooManyTasks);
}

TEST_CASE("stacks by configuration") {
  Simulator sim;
  auto& base = sim.add_node(cfg("")).launch_linked_app({}, "");
  CHECK(base.user_stack.kind == StackKind::UserDemandPaged);
  CHECK(base.kernel_stack.kind == StackKind::KernelPinned);
  CHECK(base.saved_stack_vma.has_value());

  Node& ps = sim.add_node(cfg("nss_ps,pf_ss"));
  auto& pinned = ps.launch_linked_app({}, "");
  CHECK(pinned.user_stack.kind == StackKind::NssPinnedUser);
  CHECK(ps.stack(pinned.user_stack).never_faults());

  auto& proc = sim.add_node(cfg("trap")).spawn_process({}, {});
  CHECK(proc.user_stack.kind == StackKind::UserDemandPaged);
  CHECK_FALSE(proc.saved_stack_vma.has_value());
}

TEST_CASE("kernel arena budget") {
  Simulator sim;
  NodeOptions o;
  o.kernel_budget = 128 << 10;
  Node& n = sim.add_node(cfg("trap"), o);
  // Fault and double-fault stacks take 32 KiB, each task a 16 KiB kernel stack.
  for (int i = 0; i < 6; ++i) n.spawn_process({}, {});
  CHECK(error_of([&] { n.spawn_process({}, {}); }) == Errc::AddressSpaceExhausted);
}
