// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "bsim/error.hpp"
#include "bsim/node.hpp"
#include "bsim/simulator.hpp"

namespace bsim {

namespace detail {

void post_request(TaskControlBlock& task, Request req, std::coroutine_handle<> h) {
  task.request = std::move(req);
  task.resume_point = h;
  ++task.continuation;
}

RequestResult take_result(TaskControlBlock& task) {
  if (task.error) std::rethrow_exception(std::exchange(task.error, nullptr));
  return std::exchange(task.result, std::monostate{});
}

}  // namespace detail

TaskId TaskApi::id() const noexcept { return task_->task_id; }
Cycles TaskApi::now() const noexcept { return node_->clock(); }

RequestAwaiter<ServiceResult> TaskApi::syscall(ServiceId id, ServiceArgs args) {
  return {*task_, SyscallRequest{id, std::move(args)}};
}

RequestAwaiter<ServiceResult> TaskApi::getppid() { return syscall(ServiceId::Getppid, {}); }

RequestAwaiter<ServiceResult> TaskApi::io(IoDirection dir, int fd, std::uint64_t length, Bytes data) {
  static constexpr ServiceId ids[] = {ServiceId::Read, ServiceId::Write, ServiceId::SendTo, ServiceId::RecvFrom};
  ServiceArgs a;
  a.fd = fd;
  a.length = is_receive(dir) ? length : data.size();
  a.data = std::move(data);
  return syscall(ids[static_cast<int>(dir)], std::move(a));
}

RequestAwaiter<ServiceResult> TaskApi::read(int fd, std::uint64_t length) { return io(IoDirection::Read, fd, length); }

RequestAwaiter<ServiceResult> TaskApi::write(int fd, Bytes data) {
  return io(IoDirection::Write, fd, 0, std::move(data));
}

RequestAwaiter<ServiceResult> TaskApi::mmap(std::uint64_t bytes, VmaKind kind, bool pinned, std::uint64_t stack_bytes) {
  ServiceArgs a;
  a.length = bytes;
  a.kind = kind;
  a.pinned = pinned;
  a.stack_bytes = stack_bytes;
  return syscall(ServiceId::Mmap, std::move(a));
}

RequestAwaiter<ServiceResult> TaskApi::nanosleep(Cycles duration) {
  ServiceArgs a;
  a.duration = duration;
  return syscall(ServiceId::Nanosleep, std::move(a));
}

RequestAwaiter<ServiceResult> TaskApi::close(int fd) {
  ServiceArgs a;
  a.fd = fd;
  return syscall(ServiceId::Close, std::move(a));
}

RequestAwaiter<ServiceResult> TaskApi::poll(std::vector<int> fds) {
  ServiceArgs a;
  a.fds = std::move(fds);
  return syscall(ServiceId::Poll, std::move(a));
}

RequestAwaiter<ServiceResult> TaskApi::shortcut_send(int fd, Bytes data) {
  return {*task_, ShortcutRequest{true, fd, std::move(data), 0}};
}

RequestAwaiter<ServiceResult> TaskApi::shortcut_recv(int fd, std::uint64_t length) {
  return {*task_, ShortcutRequest{false, fd, {}, length}};
}

RequestAwaiter<void> TaskApi::compute(Cycles cycles) { return {*task_, ComputeRequest{cycles}}; }
RequestAwaiter<void> TaskApi::yield() { return {*task_, YieldRequest{}}; }
RequestAwaiter<void> TaskApi::interrupt(std::uint32_t payload) { return {*task_, InterruptRequest{payload}}; }
RequestAwaiter<FaultOutcome> TaskApi::touch(std::uint64_t addr) { return {*task_, TouchRequest{addr}}; }

RequestAwaiter<TaskId> TaskApi::clone(AppEntry entry, CloneFlags flags) {
  return {*task_, CloneRequest{std::move(entry), flags}};
}

void TaskApi::set_bypass(std::uint64_t n) { node_->set_bypass(*task_, n); }
void TaskApi::set_kernel_execution(bool on) { node_->set_kernel_execution(*task_, on); }

// ---------------------------------------------------------------------------

void Node::post_event(NodeEvent ev) {
  ev.seq = next_event_seq_++;
  events_.push(std::move(ev));
}

std::optional<Cycles> Node::next_event_time() const {
  if (events_.empty()) return std::nullopt;
  return events_.top().time;
}

std::optional<Cycles> Node::activity_time() const {
  if (runnable()) return clock_;
  if (events_.empty()) return std::nullopt;
  return std::max(clock_, events_.top().time);
}

void Node::process_due_events() {
  while (!events_.empty() && events_.top().time <= clock_) {
    NodeEvent ev = events_.top();
    events_.pop();
    handle_event(ev);
  }
}

void Node::flush_events() {
  while (!events_.empty()) {
    NodeEvent ev = events_.top();
    events_.pop();
    handle_event(ev);
  }
}

void Node::idle_until(Cycles t) {
  if (t <= clock_) return;
  idle_cycles_ += t - clock_;
  clock_ = t;
}

void Node::step(Cycles horizon) {
  process_due_events();
  if (rq_.current() == kIdleTask) {
    if (!rq_.has_ready()) return;
    reschedule(true);
  }
  TaskControlBlock& t = task(rq_.current());
  if (!t.request) {
    resume(t);
    return;
  }
  if (execute(t, horizon) != ExecStatus::Completed) return;
  t.request.reset();
  t.call = CallState{};
  if (rq_.current() == t.task_id) resume(t);
}

void Node::resume(TaskControlBlock& t) {
  std::coroutine_handle<> h = t.resume_point ? std::exchange(t.resume_point, {}) : t.program.handle();
  if (h && !t.program.done()) h.resume();
  if (t.program.done() && !t.request) terminate(t);
}

void Node::terminate(TaskControlBlock& t) {
  t.state = TaskState::Terminated;
  if (rq_.current() == t.task_id) {
    reschedule(true);
  } else {
    rq_.remove_ready(t.task_id);
  }
}

Node::ExecStatus Node::execute(TaskControlBlock& t, Cycles horizon) {
  try {
    return std::visit(
        [&](auto& req) -> ExecStatus {
          using R = std::decay_t<decltype(req)>;
          if constexpr (std::is_same_v<R, SyscallRequest>) {
            return execute_syscall(t, req, horizon);
          } else if constexpr (std::is_same_v<R, ShortcutRequest>) {
            ServiceResult out;
            WaitQueue* wq = nullptr;
            if (shortcut_body(t, req, out, wq) == BodyStatus::Done) {
              t.result = std::move(out);
              return ExecStatus::Completed;
            }
            return wait_or_poll(t, *wq, horizon);
          } else if constexpr (std::is_same_v<R, ComputeRequest>) {
            advance(req.cycles);
            return ExecStatus::Completed;
          } else if constexpr (std::is_same_v<R, TouchRequest>) {
            return execute_touch(t, req);
          } else if constexpr (std::is_same_v<R, InterruptRequest>) {
            raise_interrupt(t, req.payload);
            return ExecStatus::Completed;
          } else if constexpr (std::is_same_v<R, YieldRequest>) {
            reschedule(true);
            return ExecStatus::Completed;
          } else {
            t.result = clone_task(t, req.flags, std::move(req.entry)).task_id;
            return ExecStatus::Completed;
          }
        },
        *t.request);
  } catch (const SimError& e) {
    if (e.code() == Errc::TripleFault || e.code() == Errc::Stalled) throw;
    t.error = std::current_exception();
    return ExecStatus::Completed;
  }
}

Node::ExecStatus Node::execute_syscall(TaskControlBlock& t, SyscallRequest& req, Cycles horizon) {
  CallState& c = t.call;
  for (;;) {
    switch (c.phase) {
      case CallState::Phase::Enter:
        c.frame = kernel_enter(t, EntryCause::Syscall);
        c.phase = CallState::Phase::Body;
        break;
      case CallState::Phase::Body: {
        ServiceResult out;
        WaitQueue* wq = nullptr;
        BodyStatus st;
        try {
          st = service_body(t, req, out, wq);
        } catch (...) {
          kernel_exit(t, *c.frame);
          c.frame.reset();
          throw;
        }
        if (st == BodyStatus::Done) {
          t.result = std::move(out);
          c.phase = CallState::Phase::Exit;
          break;
        }
        if (st == BodyStatus::Stuck) {
          if (t.state != TaskState::Blocked) block_on(t, *wq);
          return ExecStatus::Blocked;
        }
        if (!c.frame->bypassed && !t.pending_signals.empty()) {
          // Restart after the exit checks have delivered the signal.
          c.restart = true;
          c.phase = CallState::Phase::Exit;
          break;
        }
        return wait_or_poll(t, *wq, horizon);
      }
      case CallState::Phase::Exit:
        kernel_exit(t, *c.frame);
        c.frame.reset();
        if (!c.restart) return ExecStatus::Completed;
        c.restart = false;
        c.layers_charged = false;
        c.woken_by_signal = false;
        c.phase = CallState::Phase::Enter;
        if (rq_.current() != t.task_id) return ExecStatus::Pending;
        break;
    }
  }
}

Node::ExecStatus Node::execute_touch(TaskControlBlock& t, const TouchRequest& req) {
  CallState& c = t.call;
  if (c.phase == CallState::Phase::Enter) {
    FaultOutcome o;
    std::optional<Frame> f = fault_begin(t, req.addr, o);
    c.fault = o;
    if (!f) {
      t.result = o;
      return ExecStatus::Completed;
    }
    c.frame = *f;
    c.phase = CallState::Phase::Body;
  }
  if (c.phase == CallState::Phase::Body) {
    const FaultOutcome h = handle_page_fault(t, req.addr);
    if (h.blocked) return ExecStatus::Blocked;
    c.fault.fast_path = h.fast_path;
    c.phase = CallState::Phase::Exit;
  }
  kernel_exit(t, *c.frame);
  c.frame.reset();
  t.result = c.fault;
  return ExecStatus::Completed;
}

Node::ExecStatus Node::wait_or_poll(TaskControlBlock& t, WaitQueue& wq, Cycles horizon) {
  if (!t.kernel_execution) {
    block_on(t, wq);
    return ExecStatus::Blocked;
  }
  // Polling: nothing can change before `horizon`, so skip straight there in
  // whole poll increments.
  const Cycles inc = std::max<Cycles>(1, options_.poll_increment);
  if (horizon == kNever) {
    throw SimError(Errc::Stalled, "task " + std::to_string(t.task_id) + " polls " + wq.name +
                                      " with nothing left in flight");
  }
  Cycles n = 1;
  if (horizon > clock_ + inc) n = (horizon - clock_ + inc - 1) / inc;
  advance(n * inc);
  return ExecStatus::Pending;
}

}  // namespace bsim
