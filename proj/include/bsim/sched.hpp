// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "bsim/types.hpp"
#include "bsim/wait_queue.hpp"

namespace bsim {

// Round-robin run queue. Costs and task states are handled by the node; this
// only tracks ordering.
class RunQueue {
 public:
  TaskId current() const noexcept { return current_; }
  const std::deque<TaskId>& ready() const noexcept { return ready_; }
  bool has_ready() const noexcept { return !ready_.empty(); }

  void set_current(TaskId id) noexcept { current_ = id; }
  void push_ready(TaskId id) { ready_.push_back(id); }
  bool remove_ready(TaskId id);

  // Picks the head of the ready queue, or the idle task. When requeue is set
  // the outgoing current task goes to the tail first.
  TaskId pick_next(bool requeue_current);

 private:
  std::deque<TaskId> ready_;
  TaskId current_ = kIdleTask;
};

// One context-switch record; `voluntary` is false for preemptions.
struct SwitchRecord {
  Cycles at = 0;
  TaskId from = kIdleTask;
  TaskId to = kIdleTask;
  bool voluntary = true;

  friend bool operator==(const SwitchRecord&, const SwitchRecord&) = default;
};

}  // namespace bsim
