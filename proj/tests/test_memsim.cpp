#include "bsim/simulator.hpp"
#include "support.hpp"

using namespace bsim;
using bsim::testing::cfg;
using bsim::testing::error_of;
using E = CostEvent;

namespace {

Program mmap_with_stack(TaskApi api) {
  co_await api.mmap(kPageSize, VmaKind::Mmap, false, kPageSize);
}

}  // namespace

TEST_CASE("mmap maps whole pages and populates them on first touch") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& t = n.spawn_process({}, {});
  const Vma v = n.mmap_region(t, 3 * kPageSize - 100, VmaKind::Mmap);
  CHECK(v.pages() == 3);
  const auto hash0 = t.mm->page_map_hash();
  for (PageNo p = v.start; p < v.end; ++p) {
    CHECK(n.touch_page(t, p * kPageSize + 8).faulted);
    CHECK_FALSE(n.touch_page(t, p * kPageSize).faulted);
  }
  CHECK(t.mm->populated_pages().size() == 3);
  CHECK(t.mm->page_map_hash() != hash0);
  CHECK_FALSE(t.mm->mm_lock().owner.has_value());
  CHECK(t.mm->mm_lock().acquisitions == t.mm->mm_lock().releases);
}

TEST_CASE("mapping while holding mm_lock") {
  Simulator sim;
  Node& n = sim.add_node(cfg("trap"));
  auto& t = n.spawn_process({}, {});
  REQUIRE(t.mm->try_lock(t.task_id) == LockAttempt::Acquired);
  CHECK(error_of([&] { n.mmap_region(t, kPageSize, VmaKind::Mmap); }) == Errc::MmLockHeld);
  t.mm->unlock(t.task_id);
}

TEST_CASE("pinned regions and unmapped addresses") {
  Simulator sim;
  Node& n = sim.add_node(cfg(""));
  auto& t = n.launch_linked_app({}, "");
  const Vma pinned = n.mmap_region(t, 2 * kPageSize, VmaKind::Heap, true);
  CHECK(pinned.pinned);
  const auto before = n.ledger().counts();
  CHECK_FALSE(n.touch_page(t, pinned.start * kPageSize).faulted);
  CHECK_FALSE(n.touch_page(t, (pinned.start + 1) * kPageSize).faulted);
  CHECK((n.ledger().counts() - before).total() == 0);
  CHECK(error_of([&] { n.touch_page(t, 0x1000); }) == Errc::SegFault);
}

TEST_CASE("stack faults on a shared stack") {
  SUBCASE("nss with pf_df goes through the double-fault vector") {
    Simulator sim;
    Node& n = sim.add_node(cfg("nss,pf_df"));
    auto& t = n.launch_linked_app({}, "");
    const auto before = n.ledger().counts();
    const FaultOutcome o = n.touch_page(t, n.next_stack_page(t));
    CHECK(o.faulted);
    CHECK(o.via_double_fault);
    CHECK(o.fast_path);
    CHECK(o.handler_stack == StackKind::DoubleFaultDedicated);
    CHECK(n.ledger().counts() - before == EventCounts{{E::PageFaultVector, 1},
                                                      {E::EntryChecks, 1},
                                                      {E::DoubleFaultVector, 1},
                                                      {E::StackSwitch, 1},
                                                      {E::ExitChecks, 1},
                                                      {E::IretReturn, 1}});
    CHECK(t.current_stack == t.user_stack);
  }
  SUBCASE("pf_ss uses the dedicated fault stack") {
    Simulator sim;
    Node& n = sim.add_node(cfg("nss,pf_ss"));
    auto& t = n.launch_linked_app({}, "");
    const FaultOutcome o = n.touch_page(t, n.next_stack_page(t));
    CHECK_FALSE(o.via_double_fault);
    CHECK(o.handler_stack == StackKind::FaultDedicated);
  }
  SUBCASE("no policy is a triple fault") {
    Simulator sim;
    ConfigFlags f;
    f.baseline = Baseline::LinkedBase;
    f.nss = true;
    Node& n = sim.add_node(BoundaryConfig::unchecked(f));
    auto& t = n.launch_linked_app({}, "");
    CHECK(error_of([&] { n.touch_page(t, n.next_stack_page(t)); }) == Errc::TripleFault);
  }
  SUBCASE("nss_ps never faults on its own stack") {
    Simulator sim;
    Node& n = sim.add_node(cfg("nss_ps,pf_df"));
    auto& t = n.launch_linked_app({}, "");
    const auto& d = n.stack(t.current_stack);
    CHECK(d.never_faults());
    CHECK_FALSE(n.touch_page(t, d.top - kPageSize).faulted);
  }
}

TEST_CASE("stacks grow down one page at a time") {
  for (const char* tokens : {"trap", "", "nss,pf_df"}) {
    CAPTURE(tokens);
    Simulator sim;
    Node& n = sim.add_node(cfg(tokens));
    auto& t = n.config().linked() ? n.launch_linked_app({}, "") : n.spawn_process({}, {});
    const std::uint64_t top = n.next_stack_page(t);
    n.touch_page(t, top);
    const std::uint64_t below = n.next_stack_page(t);
    CHECK(below == top - kPageSize);
    CHECK(n.touch_page(t, below).faulted);
    CHECK(n.stack(t.user_stack).low_watermark == below);
    CHECK(error_of([&] { n.touch_page(t, below - 2 * kPageSize); }) == Errc::SegFault);
  }
}

TEST_CASE("grow-down stops at the stack limit") {
  Simulator sim;
  NodeOptions o;
  o.stacks.user = 2 * kPageSize;
  Node& n = sim.add_node(cfg("trap"), o);
  auto& t = n.spawn_process({}, {});
  n.touch_page(t, n.next_stack_page(t));
  n.touch_page(t, n.next_stack_page(t));
  CHECK(error_of([&] { n.touch_page(t, n.next_stack_page(t)); }) == Errc::SegFault);
}

TEST_CASE("fault while a service holds mm_lock") {
  auto run = [](bool fast_path) {
    Simulator sim;
    NodeOptions o;
    o.fault_fast_path = fast_path;
    Node& n = sim.add_node(cfg("nss,pf_df"), o);
    const TaskId id = n.launch_linked_app(mmap_with_stack, "").task_id;
    return std::pair{sim.run(), id};
  };
  const auto [stuck, id] = run(false);
  CHECK_FALSE(stuck.finished);
  REQUIRE(stuck.deadlock.has_value());
  CHECK(stuck.deadlock->report.cycle == std::vector<TaskId>{id});

  const auto [ok, _] = run(true);
  CHECK(ok.finished);
  CHECK_FALSE(ok.deadlock.has_value());
}

TEST_CASE("the same service on a pinned kernel stack needs no fast path") {
  Simulator sim;
  NodeOptions o;
  o.fault_fast_path = false;
  sim.add_node(cfg(""), o).launch_linked_app(mmap_with_stack, "");
  CHECK(sim.run().finished);
}

TEST_CASE("deadlock monitor") {
  KernelArena arena;
  AddressSpace mm(arena);
  CHECK_FALSE(deadlock_monitor(mm).has_value());
  mm.try_lock(1);
  mm.mm_lock().wq.waiters.push_back(2);
  CHECK_FALSE(deadlock_monitor(mm).has_value());
  mm.mm_lock().wq.waiters.push_back(1);
  const auto r = deadlock_monitor(mm);
  REQUIRE(r.has_value());
  CHECK(r->cycle == std::vector<TaskId>{1});
}

TEST_CASE("lock ownership") {
  KernelArena arena;
  AddressSpace mm(arena);
  CHECK(mm.try_lock(3) == LockAttempt::Acquired);
  CHECK(mm.try_lock(3) == LockAttempt::HeldBySelf);
  CHECK(mm.try_lock(4) == LockAttempt::HeldByOther);
  CHECK_THROWS_AS(mm.unlock(4), std::logic_error);
  mm.unlock(3);
  CHECK(mm.try_lock(4) == LockAttempt::Acquired);
}

TEST_CASE("address space exhaustion") {
  KernelArena arena(8 * kPageSize);
  AddressSpace mm(arena);
  mm.map_region(8 * kPageSize, VmaKind::Heap, true);
  CHECK(error_of([&] { mm.map_region(1, VmaKind::Heap, true); }) == Errc::AddressSpaceExhausted);
  CHECK(error_of([&] { mm.map_region(0, VmaKind::Mmap, false); }) == Errc::BadArgument);
}
