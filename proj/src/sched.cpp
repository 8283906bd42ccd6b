// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "bsim/error.hpp"
#include "bsim/node.hpp"
#include "bsim/sched.hpp"

namespace bsim {

bool RunQueue::remove_ready(TaskId id) {
  auto it = std::find(ready_.begin(), ready_.end(), id);
  if (it == ready_.end()) return false;
  ready_.erase(it);
  return true;
}

TaskId RunQueue::pick_next(bool requeue_current) {
  if (requeue_current && current_ != kIdleTask) ready_.push_back(current_);
  if (ready_.empty()) {
    current_ = kIdleTask;
  } else {
    current_ = ready_.front();
    ready_.pop_front();
  }
  return current_;
}

TaskId Node::reschedule(bool voluntary) {
  ++sched_invocations_;
  const TaskId from = rq_.current();
  bool requeue = false;
  if (from != kIdleTask) {
    TaskControlBlock& t = task(from);
    if (t.state == TaskState::Running) {
      t.state = TaskState::Ready;
      requeue = true;
    }
  }
  if (!requeue) rq_.set_current(kIdleTask);
  const TaskId to = rq_.pick_next(requeue);
  if (to != from) switches_.push_back(SwitchRecord{clock_, from, to, voluntary});
  if (to != kIdleTask) {
    TaskControlBlock& n = task(to);
    n.state = TaskState::Running;
    n.slice_start = clock_;
  }
  return to;
}

TaskId Node::schedule() { return reschedule(true); }

void Node::block_on(TaskControlBlock& t, WaitQueue& wq) {
  charge(CostEvent::SchedSleep, t.task_id);
  const bool was_current = rq_.current() == t.task_id;
  if (!was_current) rq_.remove_ready(t.task_id);
  t.state = TaskState::Blocked;
  t.blocked_on = &wq;
  wq.waiters.push_back(t.task_id);
  if (was_current) reschedule(true);
}

void Node::wake_one(WaitQueue& wq) {
  if (wq.waiters.empty()) return;
  const TaskId id = wq.waiters.front();
  wq.waiters.pop_front();
  TaskControlBlock& t = task(id);
  t.blocked_on = nullptr;
  t.state = TaskState::Ready;
  rq_.push_ready(id);
  charge(CostEvent::SchedWakeup, id);
}

void Node::set_kernel_execution(TaskControlBlock& t, bool on) {
  if (t.path_kind != PathKind::LinkedApp) {
    throw SimError(Errc::KernelExecOnTrapProcess, "task " + std::to_string(t.task_id) + " is a trap process");
  }
  t.kernel_execution = on;
}

TaskControlBlock& Node::clone_task(TaskControlBlock& parent, CloneFlags flags, AppEntry entry) {
  if (parent.state == TaskState::Terminated) {
    throw SimError(Errc::BadArgument, "clone of terminated task " + std::to_string(parent.task_id));
  }
  TaskControlBlock& child = create_task(parent.path_kind, std::move(entry), parent.task_id, parent.mm, parent.files);
  child.clone_flags = flags;
  const bool parent_shares = parent.path_kind == PathKind::LinkedApp && !trap_path(parent) && config_.shares_stack();
  if (flags & kCloneUkl) {
    // Registers are copied from wherever the parent's entry code left them.
    child.initial_state_source = parent_shares ? stack(parent.user_stack).ref.kind : StackKind::KernelPinned;
    child.initial_state_valid = true;
  } else {
    child.initial_state_source = StackKind::KernelPinned;
    child.initial_state_valid = !parent_shares;
  }
  return child;
}

void Node::deliver_signal(TaskControlBlock& t, int sig) {
  t.pending_signals.push_back(sig);
  if (t.state != TaskState::Blocked || !t.blocked_on) return;
  auto& waiters = t.blocked_on->waiters;
  waiters.erase(std::remove(waiters.begin(), waiters.end(), t.task_id), waiters.end());
  t.blocked_on = nullptr;
  t.state = TaskState::Ready;
  t.call.woken_by_signal = true;
  rq_.push_ready(t.task_id);
  charge(CostEvent::SchedWakeup, t.task_id);
}

}  // namespace bsim
