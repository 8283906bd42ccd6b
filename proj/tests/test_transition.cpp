#include "bsim/simulator.hpp"
#include "support.hpp"

using namespace bsim;
using bsim::testing::cfg;
using bsim::testing::error_of;
using E = CostEvent;

namespace {

struct Fixture {
  explicit Fixture(std::string_view tokens, NodeOptions o = {}) : node(&sim.add_node(cfg(tokens), o)) {
    task = node->config().linked() ? &node->launch_linked_app({}, "") : &node->spawn_process({}, {});
  }
  EventCounts since(const EventCounts& before) const { return node->ledger().counts() - before; }

  Simulator sim;
  Node* node;
  TaskControlBlock* task;
};

struct ContextSnapshot {
  std::uint64_t continuation;
  FlagsWord flags;
  ExecMode mode;
  StackRef stack;
  int depth;
  std::size_t records;

  friend bool operator==(const ContextSnapshot&, const ContextSnapshot&) = default;
};

ContextSnapshot snap(const TaskControlBlock& t) {
  return {t.continuation, t.flags, t.mode, t.current_stack, t.kernel_depth, t.user_stack_records.size()};
}

}  // namespace

TEST_CASE("syscall enter and exit events per baseline") {
  SUBCASE("trap") {
    Fixture f("trap");
    const auto before = f.node->ledger().counts();
    Frame fr = f.node->kernel_enter(*f.task, EntryCause::Syscall);
    CHECK(f.since(before) == EventCounts{{E::ModeSwitchEnter, 1}, {E::EntryChecks, 1}, {E::StackSwitch, 1}});
    CHECK(f.task->mode == ExecMode::Kernel);
    CHECK(f.task->current_stack == f.task->kernel_stack);
    const auto mid = f.node->ledger().counts();
    f.node->kernel_exit(*f.task, fr);
    CHECK(f.since(mid) == EventCounts{{E::ExitChecks, 1}, {E::ModeSwitchExit, 1}, {E::StackSwitch, 1}});
    CHECK(f.task->mode == ExecMode::Application);
    CHECK(f.task->current_stack == f.task->user_stack);
  }
  SUBCASE("linked base has no mode switch") {
    Fixture f("");
    const auto before = f.node->ledger().counts();
    Frame fr = f.node->kernel_enter(*f.task, EntryCause::Syscall);
    f.node->kernel_exit(*f.task, fr);
    CHECK(f.since(before) ==
          EventCounts{{E::EntryChecks, 1}, {E::ExitChecks, 1}, {E::StackSwitch, 2}});
  }
  SUBCASE("nss stays on the application stack") {
    Fixture f("nss,pf_df");
    const auto before = f.node->ledger().counts();
    Frame fr = f.node->kernel_enter(*f.task, EntryCause::Syscall);
    CHECK(f.task->current_stack == f.task->user_stack);
    f.node->kernel_exit(*f.task, fr);
    CHECK(f.since(before) == EventCounts{{E::EntryChecks, 1}, {E::ExitChecks, 1}});
  }
  SUBCASE("bypass skips both halves") {
    Fixture f("byp");
    f.node->set_bypass(*f.task, 3);
    const auto before = f.node->ledger().counts();
    Frame fr = f.node->kernel_enter(*f.task, EntryCause::Syscall);
    CHECK(fr.bypassed);
    CHECK(f.task->byp_remaining == 2);
    f.node->kernel_exit(*f.task, fr);
    CHECK(f.since(before).total() == 0);
    CHECK(f.task->mode == ExecMode::Application);
  }
}

TEST_CASE("getppid cost matches the weighted event oracle") {
  for (const char* tokens : {"trap", "", "byp"}) {
    Fixture f(tokens);
    if (f.node->config().byp()) f.node->set_bypass(*f.task, 1);
    const auto before = f.node->ledger().counts();
    const Cycles t0 = f.node->clock();
    f.node->invoke_service(*f.task, ServiceId::Getppid, {});
    const auto delta = f.since(before);
    CHECK(delta[E::DispatchLayer] == 1);
    CHECK(f.node->clock() - t0 == bsim::testing::oracle_cycles(delta, f.node->weights()));
  }
}

TEST_CASE("bypass budget runs out") {
  Fixture f("byp");
  f.node->set_bypass(*f.task, 5);
  const auto before = f.node->ledger().counts();
  for (int i = 0; i < 7; ++i) f.node->invoke_service(*f.task, ServiceId::Getppid, {});
  const auto d = f.since(before);
  CHECK(d[E::EntryChecks] == 2);
  CHECK(d[E::ExitChecks] == 2);
  CHECK(d[E::DispatchLayer] == 7);
  CHECK(f.task->byp_remaining == 0);
}

TEST_CASE("bypass needs a linked thread and the byp option") {
  Fixture trap("trap");
  CHECK(error_of([&] { trap.node->set_bypass(*trap.task, 1); }) == Errc::BypassOnTrapProcess);

  Fixture plain("");
  plain.node->set_bypass(*plain.task, 4);
  Frame fr = plain.node->kernel_enter(*plain.task, EntryCause::Syscall);
  CHECK_FALSE(fr.bypassed);
  CHECK(plain.task->byp_remaining == 4);
  plain.node->kernel_exit(*plain.task, fr);
}

TEST_CASE("misuse of frames") {
  Fixture f("");
  Frame fr = f.node->kernel_enter(*f.task, EntryCause::Syscall);
  CHECK(error_of([&] { f.node->kernel_enter(*f.task, EntryCause::Syscall); }) == Errc::ReentrantEnter);
  f.node->kernel_exit(*f.task, fr);
  CHECK(error_of([&] { f.node->kernel_exit(*f.task, fr); }) == Errc::FrameReuse);

  Frame sys = f.node->kernel_enter(*f.task, EntryCause::Syscall);
  CHECK(error_of([&] { f.node->return_from_event(*f.task, sys); }) == Errc::BadArgument);
  f.node->kernel_exit(*f.task, sys);
}

TEST_CASE("faults and interrupts nest one level") {
  Fixture f("");
  Frame outer = f.node->kernel_enter(*f.task, EntryCause::Syscall);
  Frame inner = f.node->kernel_enter(*f.task, EntryCause::Interrupt);
  CHECK(inner.nested);
  CHECK(error_of([&] { f.node->kernel_enter(*f.task, EntryCause::Fault); }) == Errc::ReentrantEnter);
  const auto before = f.node->ledger().counts();
  f.node->kernel_exit(*f.task, inner);
  CHECK(f.since(before) == EventCounts{{E::IretReturn, 1}});
  CHECK(f.task->mode == ExecMode::Kernel);
  f.node->kernel_exit(*f.task, outer);
  CHECK(f.task->mode == ExecMode::Application);
  CHECK(f.task->kernel_depth == 0);
}

TEST_CASE("iret and the ret protocol leave the same context") {
  Fixture iret("");
  Fixture ret("ret");
  for (Fixture* f : {&iret, &ret}) f->task->continuation = 41;

  const auto b0 = iret.node->ledger().counts();
  Frame a = iret.node->kernel_enter(*iret.task, EntryCause::Fault);
  CHECK_FALSE(iret.task->flags.interrupts_enabled);
  iret.node->kernel_exit(*iret.task, a);
  CHECK(iret.since(b0) ==
        EventCounts{{E::EntryChecks, 1}, {E::StackSwitch, 1}, {E::ExitChecks, 1}, {E::IretReturn, 1}});

  const auto b1 = ret.node->ledger().counts();
  Frame b = ret.node->kernel_enter(*ret.task, EntryCause::Fault);
  ret.node->kernel_exit(*ret.task, b);
  CHECK(ret.since(b1) ==
        EventCounts{{E::EntryChecks, 1}, {E::StackSwitch, 2}, {E::ExitChecks, 1}, {E::RetReturn, 1}});
  CHECK(ret.node->protocol_returns() == 1);

  CHECK(snap(*iret.task) == snap(*ret.task));
  CHECK(ret.task->flags.interrupts_enabled);
  CHECK(ret.task->user_stack_records.empty());
}

TEST_CASE("trap processes always use iret") {
  Fixture f("trap");
  const auto before = f.node->ledger().counts();
  Frame fr = f.node->kernel_enter(*f.task, EntryCause::Interrupt);
  f.node->kernel_exit(*f.task, fr);
  CHECK(f.since(before)[E::IretReturn] == 1);
  CHECK(f.node->protocol_returns() == 0);
}

TEST_CASE("injection outside a return") {
  Fixture f("ret");
  CHECK(error_of([&] { f.node->inject_interrupt_at(0, 1); }) == Errc::NoReturnInFlight);
  CHECK(error_of([&] { f.node->plan_injection(0, kReturnProtocolSteps, 1); }) == Errc::BadArgument);
}

TEST_CASE("interrupts injected at any protocol step are held until the return is safe") {
  Fixture clean("ret");
  {
    Frame fr = clean.node->kernel_enter(*clean.task, EntryCause::Fault);
    clean.node->kernel_exit(*clean.task, fr);
  }
  for (std::size_t step = 0; step < kReturnProtocolSteps; ++step) {
    CAPTURE(step);
    Fixture f("ret");
    bool fired = false;
    f.node->set_return_step_hook([&, step](ReturnProtocolStep s) {
      if (fired || static_cast<std::size_t>(s) != step) return;
      fired = true;
      f.node->inject_interrupt_at(step, 900 + step);
    });
    Frame fr = f.node->kernel_enter(*f.task, EntryCause::Fault);
    f.node->kernel_exit(*f.task, fr);
    CHECK_FALSE(f.node->corrupted());
    REQUIRE(f.node->interrupt_log().size() == 1);
    const auto& obs = f.node->interrupt_log().front();
    CHECK(obs.payload == 900 + step);
    CHECK(obs.injected_at == step);
    CHECK(obs.stack_valid);
    CHECK(*obs.delivered_at >= static_cast<std::size_t>(ReturnProtocolStep::PlainReturn));
    CHECK(snap(*f.task) == snap(*clean.task));
  }
}

TEST_CASE("an open interrupt gate exposes the half-switched stack") {
  NodeOptions o;
  o.unsafe_interrupt_gate = true;
  Fixture f("ret", o);
  f.node->plan_injection(0, static_cast<std::size_t>(ReturnProtocolStep::PopFlags), 7);
  Frame fr = f.node->kernel_enter(*f.task, EntryCause::Interrupt);
  f.node->kernel_exit(*f.task, fr);
  CHECK(f.node->corrupted());
  REQUIRE(f.node->interrupt_log().size() == 1);
  CHECK_FALSE(f.node->interrupt_log().front().stack_valid);
}

TEST_CASE("signals wait for a non-bypassed exit") {
  Fixture f("byp");
  f.node->set_bypass(*f.task, 1);
  f.node->deliver_signal(*f.task, 10);
  f.node->invoke_service(*f.task, ServiceId::Getppid, {});
  CHECK(f.task->delivered_signals.empty());
  CHECK(f.task->pending_signals.size() == 1);
  f.node->invoke_service(*f.task, ServiceId::Getppid, {});
  REQUIRE(f.task->delivered_signals.size() == 1);
  CHECK(f.task->delivered_signals.front() == SignalDelivery{10, 1});
}

TEST_CASE("base getppid trace against the hand-summed event list") {
  Simulator sim;
  NodeOptions o;
  o.trace = true;
  Node& n = sim.add_node(cfg(""), o);
  auto& t = n.launch_linked_app({}, "");
  CHECK(n.invoke_service(t, ServiceId::Getppid, {}).value == 0);
  const EventCounts hand{{E::EntryChecks, 1}, {E::StackSwitch, 2}, {E::DispatchLayer, 1}, {E::ExitChecks, 1}};
  EventCounts replay;
  for (const auto& e : n.ledger().trace()) {
    CHECK(e.task == t.task_id);
    replay[e.event] += e.count;
  }
  CHECK(replay == hand);
  CHECK(n.ledger().counts() == hand);
  CHECK(n.clock() == bsim::testing::oracle_cycles(hand, n.weights()));
}
