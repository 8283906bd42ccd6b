// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <coroutine>
#include <exception>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bsim/program.hpp"
#include "bsim/sched.hpp"
#include "bsim/types.hpp"

namespace bsim {

class FdTable;

enum class TaskState { Ready, Running, Blocked, Terminated };

struct SignalDelivery {
  int sig = 0;
  std::uint64_t exit_serial = 0;  // which non-bypassed exit delivered it
  friend bool operator==(const SignalDelivery&, const SignalDelivery&) = default;
};

// Copied onto the user stack by the ret protocol and popped by PlainReturn.
struct ReturnRecord {
  std::uint64_t target = 0;
  FlagsWord flags;
};

// Progress of the request the task is currently executing.
struct CallState {
  enum class Phase { Enter, Body, Exit };
  Phase phase = Phase::Enter;
  std::optional<Frame> frame;
  bool layers_charged = false;
  bool woken_by_signal = false;
  bool restart = false;             // re-enter after exit checks ran for a signal
  std::optional<Cycles> deadline;   // nanosleep
  FaultOutcome fault;               // touch in progress
};

struct TaskControlBlock {
  TaskId task_id = 0;
  TaskId parent_id = 0;
  NodeId node = 0;
  ExecMode mode = ExecMode::Application;
  PathKind path_kind = PathKind::TrapProcess;
  std::uint64_t byp_remaining = 0;
  bool kernel_execution = false;
  StackRef user_stack;
  StackRef kernel_stack;
  std::optional<VmaRef> saved_stack_vma;
  bool need_resched = false;
  std::deque<int> pending_signals;
  CloneFlags clone_flags = kCloneNone;
  std::vector<std::string> cmdline;

  // Execution context.
  StackRef current_stack;
  FlagsWord flags;
  std::uint64_t continuation = 0;
  std::vector<ReturnRecord> user_stack_records;
  int kernel_depth = 0;
  std::uint64_t exit_serial = 0;
  std::vector<SignalDelivery> delivered_signals;
  std::optional<StackKind> initial_state_source;
  bool initial_state_valid = true;
  std::shared_ptr<AddressSpace> mm;
  std::shared_ptr<FdTable> files;

  // Scheduling.
  TaskState state = TaskState::Ready;
  WaitQueue* blocked_on = nullptr;
  Cycles slice_start = 0;
  bool daemon = false;

  // Runtime. The entry closure is kept alive for the program's lifetime:
  // lambda coroutines refer to their captures through it.
  AppEntry entry;
  Program program;
  std::coroutine_handle<> resume_point;
  std::optional<Request> request;
  RequestResult result;
  std::exception_ptr error;  // rethrown into the program by take_result
  CallState call;
};

}  // namespace bsim
