// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <coroutine>
#include <functional>
#include <type_traits>
#include <utility>
#include <variant>

#include "bsim/types.hpp"

namespace bsim {

class Node;
struct TaskControlBlock;
class TaskApi;

// Coroutine type for simulated application code. A Program starts suspended;
// the owning node resumes it. Programs may co_await other Programs as
// subroutines.
class Program {
 public:
  struct promise_type {
    std::coroutine_handle<> continuation;

    Program get_return_object() {
      return Program(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    std::suspend_always initial_suspend() noexcept { return {}; }

    struct FinalAwaiter {
      bool await_ready() noexcept { return false; }
      std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
        if (auto next = h.promise().continuation) return next;
        return std::noop_coroutine();
      }
      void await_resume() noexcept {}
    };
    FinalAwaiter final_suspend() noexcept { return {}; }
    void return_void() noexcept {}
    void unhandled_exception() { throw; }
  };

  Program() = default;
  Program(Program&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
  Program& operator=(Program&& other) noexcept {
    if (this != &other) {
      reset();
      handle_ = std::exchange(other.handle_, {});
    }
    return *this;
  }
  Program(const Program&) = delete;
  Program& operator=(const Program&) = delete;
  ~Program() { reset(); }

  bool valid() const noexcept { return static_cast<bool>(handle_); }
  bool done() const noexcept { return !handle_ || handle_.done(); }
  std::coroutine_handle<> handle() const noexcept { return handle_; }

  // Awaiting a Program runs it as a subroutine of the awaiting coroutine.
  bool await_ready() const noexcept { return done(); }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
    handle_.promise().continuation = parent;
    return handle_;
  }
  void await_resume() const noexcept {}

 private:
  explicit Program(std::coroutine_handle<promise_type> h) : handle_(h) {}
  void reset() noexcept {
    if (handle_) handle_.destroy();
    handle_ = {};
  }

  std::coroutine_handle<promise_type> handle_;
};

using AppEntry = std::function<Program(TaskApi)>;

struct SyscallRequest {
  ServiceId id;
  ServiceArgs args;
};
struct ShortcutRequest {
  bool send = false;
  int fd = -1;
  Bytes data;
  std::uint64_t length = 0;
};
struct ComputeRequest {
  Cycles cycles = 0;
};
struct TouchRequest {
  std::uint64_t addr = 0;
};
// A device interrupt arriving while the task runs application code.
struct InterruptRequest {
  std::uint32_t payload = 0;
};
struct YieldRequest {};
struct CloneRequest {
  AppEntry entry;
  CloneFlags flags = kCloneNone;
};

using Request = std::variant<SyscallRequest, ShortcutRequest, ComputeRequest, TouchRequest,
                             InterruptRequest, YieldRequest, CloneRequest>;
using RequestResult = std::variant<std::monostate, ServiceResult, FaultOutcome, TaskId>;

namespace detail {
void post_request(TaskControlBlock& task, Request req, std::coroutine_handle<> h);
RequestResult take_result(TaskControlBlock& task);
}  // namespace detail

template <class T>
class RequestAwaiter {
 public:
  RequestAwaiter(TaskControlBlock& task, Request req) : task_(&task), req_(std::move(req)) {}

  bool await_ready() const noexcept { return false; }
  void await_suspend(std::coroutine_handle<> h) { detail::post_request(*task_, std::move(req_), h); }
  T await_resume() {
    if constexpr (std::is_void_v<T>) {
      detail::take_result(*task_);
    } else {
      return std::get<T>(detail::take_result(*task_));
    }
  }

 private:
  TaskControlBlock* task_;
  Request req_;
};

// The application's view of its kernel: every call suspends the program
// until the node has executed it at the task's virtual time.
class TaskApi {
 public:
  TaskApi(Node& node, TaskControlBlock& task) : node_(&node), task_(&task) {}

  Node& node() const noexcept { return *node_; }
  TaskControlBlock& self() const noexcept { return *task_; }
  TaskId id() const noexcept;
  Cycles now() const noexcept;

  RequestAwaiter<ServiceResult> syscall(ServiceId id, ServiceArgs args);
  RequestAwaiter<ServiceResult> getppid();
  RequestAwaiter<ServiceResult> io(IoDirection dir, int fd, std::uint64_t length, Bytes data = {});
  RequestAwaiter<ServiceResult> read(int fd, std::uint64_t length);
  RequestAwaiter<ServiceResult> write(int fd, Bytes data);
  RequestAwaiter<ServiceResult> mmap(std::uint64_t bytes, VmaKind kind, bool pinned = false,
                                     std::uint64_t stack_bytes = 0);
  RequestAwaiter<ServiceResult> nanosleep(Cycles duration);
  RequestAwaiter<ServiceResult> close(int fd);
  // Waits until at least one of `fds` has input or end-of-stream.
  RequestAwaiter<ServiceResult> poll(std::vector<int> fds);

  RequestAwaiter<ServiceResult> shortcut_send(int fd, Bytes data);
  RequestAwaiter<ServiceResult> shortcut_recv(int fd, std::uint64_t length);

  RequestAwaiter<void> compute(Cycles cycles);
  RequestAwaiter<void> yield();
  RequestAwaiter<void> interrupt(std::uint32_t payload);
  RequestAwaiter<FaultOutcome> touch(std::uint64_t addr);
  RequestAwaiter<TaskId> clone(AppEntry entry, CloneFlags flags);

  // Per-thread knobs; plain calls for the linked application.
  void set_bypass(std::uint64_t n);
  void set_kernel_execution(bool on);

 private:
  Node* node_;
  TaskControlBlock* task_;
};

}  // namespace bsim
