// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "bsim/error.hpp"
#include "bsim/node.hpp"

namespace bsim {

std::string_view step_name(ReturnProtocolStep step) noexcept {
  switch (step) {
    case ReturnProtocolStep::CopyRetAddrToUserStack: return "CopyRetAddrToUserStack";
    case ReturnProtocolStep::CopyFlagsToUserStack: return "CopyFlagsToUserStack";
    case ReturnProtocolStep::SwitchToUserStack: return "SwitchToUserStack";
    case ReturnProtocolStep::PopFlags: return "PopFlags";
    case ReturnProtocolStep::PlainReturn: return "PlainReturn";
  }
  return "?";
}

bool Node::trap_path(const TaskControlBlock& task) const noexcept {
  return task.path_kind == PathKind::TrapProcess || config_.baseline() == Baseline::Trap;
}

Frame Node::kernel_enter(TaskControlBlock& task, EntryCause cause) {
  const bool nested = task.mode == ExecMode::Kernel;
  if (nested && cause == EntryCause::Syscall) {
    throw SimError(Errc::ReentrantEnter, "syscall entry while task " + std::to_string(task.task_id) +
                                             " is already in kernel mode");
  }
  if (nested && task.kernel_depth > 1) {
    throw SimError(Errc::ReentrantEnter, "kernel entries nest at most one level");
  }

  Frame f;
  f.return_target = task.continuation;
  f.saved_flags = task.flags;
  f.saved_stack = task.current_stack;
  f.entered_via = cause;
  f.nested = nested;
  f.trap_path = trap_path(task);
  f.serial = next_frame_serial_++;
  live_frames_.insert(f.serial);

  if (!nested && cause == EntryCause::Syscall && !f.trap_path && config_.byp() && task.byp_remaining > 0) {
    --task.byp_remaining;
    f.bypassed = true;
  } else if (!nested) {
    if (f.trap_path) charge(CostEvent::ModeSwitchEnter, task.task_id);
    charge(CostEvent::EntryChecks, task.task_id);
    if (f.trap_path || !config_.shares_stack()) {
      charge(CostEvent::StackSwitch, task.task_id);
      task.current_stack = task.kernel_stack;
    }
  }
  if (cause != EntryCause::Syscall) task.flags.interrupts_enabled = false;
  task.mode = ExecMode::Kernel;
  ++task.kernel_depth;
  return f;
}

void Node::consume(const Frame& frame) {
  if (live_frames_.erase(frame.serial) == 0) {
    throw SimError(Errc::FrameReuse, "frame " + std::to_string(frame.serial) + " already consumed");
  }
}

void Node::run_exit_checks(TaskControlBlock& task) {
  ++task.exit_serial;
  while (!task.pending_signals.empty()) {
    task.delivered_signals.push_back({task.pending_signals.front(), task.exit_serial});
    task.pending_signals.pop_front();
  }
  if (options_.timeslice > 0 && clock_ >= task.slice_start + options_.timeslice && rq_.has_ready()) {
    task.need_resched = true;
  }
  if (task.need_resched && !task.kernel_execution) {
    task.need_resched = false;
    reschedule(false);
  }
}

void Node::kernel_exit(TaskControlBlock& task, Frame& frame) {
  consume(frame);
  if (frame.bypassed) {
    task.mode = ExecMode::Application;
    --task.kernel_depth;
    task.continuation = frame.return_target;
    return;
  }
  if (frame.nested) {
    event_return(task, frame);
    return;
  }
  charge(CostEvent::ExitChecks, task.task_id);
  run_exit_checks(task);
  if (frame.trap_path) charge(CostEvent::ModeSwitchExit, task.task_id);
  if (frame.entered_via != EntryCause::Syscall) {
    event_return(task, frame);
    return;
  }
  if (frame.trap_path || !config_.shares_stack()) charge(CostEvent::StackSwitch, task.task_id);
  task.current_stack = frame.saved_stack;
  task.flags = frame.saved_flags;
  task.mode = ExecMode::Application;
  --task.kernel_depth;
  task.continuation = frame.return_target;
}

void Node::return_from_event(TaskControlBlock& task, Frame& frame) {
  if (frame.entered_via == EntryCause::Syscall) {
    throw SimError(Errc::BadArgument, "return_from_event needs a fault or interrupt frame");
  }
  consume(frame);
  event_return(task, frame);
}

void Node::event_return(TaskControlBlock& task, Frame& frame) {
  if (frame.trap_path || frame.nested || !config_.ret()) {
    charge(CostEvent::IretReturn, task.task_id);
    task.current_stack = frame.saved_stack;
    task.flags = frame.saved_flags;
    if (!frame.nested) task.mode = ExecMode::Application;
    --task.kernel_depth;
    task.continuation = frame.return_target;
    return;
  }
  run_ret_protocol(task, frame);
}

void Node::run_ret_protocol(TaskControlBlock& task, Frame& frame) {
  const std::uint64_t ordinal = protocol_returns_++;
  returns_in_flight_.push_back(ReturnInFlight{&task, frame, 0, {}});
  const std::size_t me = returns_in_flight_.size() - 1;
  auto [lo, hi] = injection_plan_.equal_range(ordinal);
  for (auto it = lo; it != hi; ++it) returns_in_flight_[me].pending.push_back(it->second);

  for (std::size_t s = 0; s < kReturnProtocolSteps; ++s) {
    const auto step = static_cast<ReturnProtocolStep>(s);
    returns_in_flight_[me].step = s;
    if (step_hook_) step_hook_(step);
    deliver_pending(me, s);
    switch (step) {
      case ReturnProtocolStep::CopyRetAddrToUserStack:
        task.user_stack_records.push_back(ReturnRecord{frame.return_target, {}});
        break;
      case ReturnProtocolStep::CopyFlagsToUserStack:
        task.user_stack_records.back().flags = frame.saved_flags;
        break;
      case ReturnProtocolStep::SwitchToUserStack:
        task.current_stack = frame.saved_stack;
        charge(CostEvent::StackSwitch, task.task_id);
        break;
      case ReturnProtocolStep::PopFlags:
        task.flags = task.user_stack_records.back().flags;
        task.mode = ExecMode::Application;
        --task.kernel_depth;
        break;
      case ReturnProtocolStep::PlainReturn:
        task.continuation = task.user_stack_records.back().target;
        task.user_stack_records.pop_back();
        charge(CostEvent::RetReturn, task.task_id);
        break;
    }
  }
  returns_in_flight_[me].step = kReturnProtocolSteps;
  deliver_pending(me, kReturnProtocolSteps);
  returns_in_flight_.pop_back();
}

void Node::deliver_pending(std::size_t index, std::size_t before_step) {
  TaskControlBlock& task = *returns_in_flight_[index].task;
  const bool gate_open = options_.unsafe_interrupt_gate ||
                         (before_step > static_cast<std::size_t>(ReturnProtocolStep::PopFlags) &&
                          task.flags.interrupts_enabled);
  if (!gate_open) return;
  for (;;) {
    auto& pending = returns_in_flight_[index].pending;
    auto it = std::find_if(pending.begin(), pending.end(),
                           [&](const ReturnInFlight::Pending& p) { return p.at_step <= before_step; });
    if (it == pending.end()) return;
    const ReturnInFlight::Pending p = *it;
    pending.erase(it);
    // Between the switch to the user stack and the flags restore the task
    // is on its user stack with kernel state: a half-switched stack.
    const bool valid = !(task.mode == ExecMode::Kernel &&
                         task.current_stack == returns_in_flight_[index].frame.saved_stack &&
                         before_step > static_cast<std::size_t>(ReturnProtocolStep::SwitchToUserStack));
    deliver_interrupt(task, p.payload, p.at_step, before_step, valid);
  }
}

void Node::inject_interrupt_at(std::size_t step_index, std::uint32_t payload) {
  if (returns_in_flight_.empty()) throw SimError(Errc::NoReturnInFlight, "no ret-protocol return in flight");
  if (step_index >= kReturnProtocolSteps) throw SimError(Errc::BadArgument, "protocol step out of range");
  returns_in_flight_.back().pending.push_back({step_index, payload});
}

void Node::plan_injection(std::uint64_t return_ordinal, std::size_t step_index, std::uint32_t payload) {
  if (step_index >= kReturnProtocolSteps) throw SimError(Errc::BadArgument, "protocol step out of range");
  injection_plan_.emplace(return_ordinal, ReturnInFlight::Pending{step_index, payload});
}

void Node::deliver_interrupt(TaskControlBlock& task, std::uint32_t payload, std::optional<std::size_t> injected,
                             std::optional<std::size_t> delivered, bool stack_valid) {
  interrupt_log_.push_back(InterruptObservation{payload, task.task_id, injected, delivered, task.current_stack,
                                                stack_valid});
  if (!stack_valid) corrupted_ = true;
  Frame f = kernel_enter(task, EntryCause::Interrupt);
  kernel_exit(task, f);
}

void Node::raise_interrupt(TaskControlBlock& task, std::uint32_t payload) {
  deliver_interrupt(task, payload, std::nullopt, std::nullopt, true);
}

void Node::set_bypass(TaskControlBlock& task, std::uint64_t n) {
  if (task.path_kind != PathKind::LinkedApp) {
    throw SimError(Errc::BypassOnTrapProcess, "task " + std::to_string(task.task_id) + " is a trap process");
  }
  task.byp_remaining = n;
}

ServiceResult Node::invoke_service(TaskControlBlock& task, ServiceId id, ServiceArgs args) {
  SyscallRequest req{id, std::move(args)};
  task.call = CallState{};
  Frame f = kernel_enter(task, EntryCause::Syscall);
  ServiceResult out;
  WaitQueue* wq = nullptr;
  BodyStatus st;
  try {
    st = service_body(task, req, out, wq);
  } catch (...) {
    kernel_exit(task, f);
    task.call = CallState{};
    throw;
  }
  if (st == BodyStatus::Stuck) {
    throw SimError(Errc::WouldBlock, "service blocked inside the kernel on " +
                                         (wq ? wq->name : std::string("a wait queue")));
  }
  kernel_exit(task, f);
  task.call = CallState{};
  if (st == BodyStatus::Wait) throw SimError(Errc::WouldBlock, "service would sleep on " + wq->name);
  return out;
}

}  // namespace bsim
