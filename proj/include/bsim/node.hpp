// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string_view>
#include <vector>

#include "bsim/config.hpp"
#include "bsim/cost.hpp"
#include "bsim/memsim.hpp"
#include "bsim/program.hpp"
#include "bsim/sched.hpp"
#include "bsim/services.hpp"
#include "bsim/task.hpp"

namespace bsim {

class Simulator;

struct NodeOptions {
  std::uint32_t task_cap = 1024;
  std::uint64_t kernel_budget = 64ull << 20;
  StackSizes stacks;
  DispatchChain chain;
  // Run time after which an exit check raises need_resched when another task
  // is ready. Zero disables it.
  Cycles timeslice = 0;
  Cycles poll_increment = 10;
  bool fault_fast_path = true;
  // Test knob: deliver interrupts injected into a ret-protocol return at the
  // injection step even when the protocol has not re-enabled them.
  bool unsafe_interrupt_gate = false;
  bool trace = false;
};

struct InterruptObservation {
  std::uint32_t payload = 0;
  TaskId task = 0;
  std::optional<std::size_t> injected_at;   // protocol step index
  std::optional<std::size_t> delivered_at;  // step index it was delivered before; 5 = after return
  StackRef interrupted_stack;
  bool stack_valid = true;
};

// Internal network/timer events, processed in (time, seq) order.
struct NodeEvent {
  enum class Kind { Arrival, WindowUpdate, Ack, Fin, Timer };
  Cycles time = 0;
  std::uint64_t seq = 0;
  Kind kind = Kind::Arrival;
  SocketId socket = 0;
  Bytes bytes;
  std::uint64_t credit = 0;
  TaskId task = 0;

  bool operator>(const NodeEvent& o) const noexcept {
    return time != o.time ? time > o.time : seq > o.seq;
  }
};

// One simulated kernel: its boundary configuration, tasks, scheduler, cost
// ledger and virtual clock. Nodes of one Simulator talk over loopback sockets.
class Node {
 public:
  Node(Simulator& sim, NodeId id, BoundaryConfig config, const WeightTable& weights, NodeOptions options);
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  NodeId id() const noexcept { return id_; }
  const BoundaryConfig& config() const noexcept { return config_; }
  const NodeOptions& options() const noexcept { return options_; }
  NodeOptions& options() noexcept { return options_; }
  Simulator& simulator() noexcept { return *sim_; }

  // ---- task core -------------------------------------------------------
  TaskControlBlock& launch_linked_app(AppEntry entry, std::string_view kernel_cmdline);
  TaskControlBlock& spawn_process(AppEntry entry, std::vector<std::string> args, TaskId parent = 0);
  TaskControlBlock& task(TaskId id);
  const TaskControlBlock& task(TaskId id) const;
  bool has_task(TaskId id) const noexcept { return tasks_.count(id) != 0; }
  std::optional<TaskId> linked_app() const noexcept { return linked_app_; }
  std::vector<TaskId> task_ids() const;

  const CostLedger& ledger() const noexcept { return ledger_; }
  const WeightTable& weights() const noexcept { return ledger_.weights(); }
  void charge(CostEvent ev, TaskId task, std::uint64_t count = 1);

  // ---- transition ------------------------------------------------------
  Frame kernel_enter(TaskControlBlock& task, EntryCause cause);
  void kernel_exit(TaskControlBlock& task, Frame& frame);
  void return_from_event(TaskControlBlock& task, Frame& frame);
  // Synchronous service invocation; throws WouldBlock where the runtime
  // would have put the task to sleep.
  ServiceResult invoke_service(TaskControlBlock& task, ServiceId id, ServiceArgs args);
  void set_bypass(TaskControlBlock& task, std::uint64_t n);
  // Queues an interrupt on the innermost ret-protocol return in flight.
  void inject_interrupt_at(std::size_t step_index, std::uint32_t payload);
  // Injects at `step_index` of the ordinal-th ret-protocol return (0-based).
  void plan_injection(std::uint64_t return_ordinal, std::size_t step_index, std::uint32_t payload);
  // Called before every protocol step; lets tests inject mid-flight.
  void set_return_step_hook(std::function<void(ReturnProtocolStep)> hook) { step_hook_ = std::move(hook); }
  // A device interrupt taken while `task` runs.
  void raise_interrupt(TaskControlBlock& task, std::uint32_t payload);
  const std::vector<InterruptObservation>& interrupt_log() const noexcept { return interrupt_log_; }
  std::uint64_t protocol_returns() const noexcept { return protocol_returns_; }
  bool corrupted() const noexcept { return corrupted_; }

  // ---- memsim ----------------------------------------------------------
  Vma mmap_region(TaskControlBlock& task, std::uint64_t length, VmaKind kind, bool pinned = false);
  FaultOutcome touch_page(TaskControlBlock& task, std::uint64_t addr);
  FaultOutcome handle_page_fault(TaskControlBlock& task, std::uint64_t addr);
  StackDescriptor& stack(StackRef ref);
  const StackDescriptor& stack(StackRef ref) const;
  StackRef fault_stack() const noexcept { return fault_stack_; }
  StackRef double_fault_stack() const noexcept { return double_fault_stack_; }
  KernelArena& arena() noexcept { return arena_; }
  // The page a further downward stack access would fault on.
  std::uint64_t next_stack_page(const TaskControlBlock& task) const;

  // ---- sched -----------------------------------------------------------
  // Round-robin reschedule; a running current task goes to the ready tail.
  TaskId schedule();
  void block_on(TaskControlBlock& task, WaitQueue& wq);
  void wake_one(WaitQueue& wq);
  void set_kernel_execution(TaskControlBlock& task, bool on);
  TaskControlBlock& clone_task(TaskControlBlock& parent, CloneFlags flags, AppEntry entry);
  void deliver_signal(TaskControlBlock& task, int sig);
  const RunQueue& run_queue() const noexcept { return rq_; }
  const std::vector<SwitchRecord>& switch_trace() const noexcept { return switches_; }
  std::uint64_t sched_invocations() const noexcept { return sched_invocations_; }

  // ---- services --------------------------------------------------------
  TaskId sys_getppid(TaskControlBlock& task);
  StreamSocket& socket_for(TaskControlBlock& task, int fd);
  ServiceResult shortcut_send(TaskControlBlock& task, int fd, Bytes data);
  ServiceResult shortcut_recv(TaskControlBlock& task, int fd, std::uint64_t length);

  // ---- runtime ---------------------------------------------------------
  Cycles clock() const noexcept { return clock_; }
  void advance(Cycles cycles) noexcept { clock_ += cycles; }
  Cycles idle_cycles() const noexcept { return idle_cycles_; }
  bool runnable() const noexcept { return rq_.current() != kIdleTask || rq_.has_ready(); }
  std::optional<Cycles> next_event_time() const;
  // Earliest time this node has something to do, if anything.
  std::optional<Cycles> activity_time() const;
  void post_event(NodeEvent ev);
  // Delivers every event due at or before the current clock.
  void process_due_events();
  // Delivers every queued event regardless of its time.
  void flush_events();
  // Jumps an idle node forward to `t`.
  void idle_until(Cycles t);
  // Executes one request of the current task. Polling loops may fast-forward
  // up to `horizon`, before which nothing can arrive from other nodes.
  void step(Cycles horizon);
  std::size_t live_tasks(bool include_daemons) const;

 private:
  enum class BodyStatus { Done, Wait, Stuck };
  enum class ExecStatus { Completed, Blocked, Pending };

  struct ReturnInFlight {
    TaskControlBlock* task = nullptr;
    Frame frame;
    std::size_t step = 0;
    struct Pending {
      std::size_t at_step;
      std::uint32_t payload;
    };
    std::vector<Pending> pending;
  };

  TaskControlBlock& create_task(PathKind kind, AppEntry entry, TaskId parent, std::shared_ptr<AddressSpace> mm,
                                std::shared_ptr<FdTable> files);
  StackRef new_stack(StackKind kind, std::uint64_t size, std::uint64_t top, std::optional<VmaRef> vma);
  bool trap_path(const TaskControlBlock& task) const noexcept;

  void consume(const Frame& frame);
  void run_exit_checks(TaskControlBlock& task);
  void event_return(TaskControlBlock& task, Frame& frame);
  void run_ret_protocol(TaskControlBlock& task, Frame& frame);
  void deliver_pending(std::size_t index, std::size_t before_step);
  void deliver_interrupt(TaskControlBlock& task, std::uint32_t payload, std::optional<std::size_t> injected,
                         std::optional<std::size_t> delivered, bool stack_valid);

  std::optional<Frame> fault_begin(TaskControlBlock& task, std::uint64_t addr, FaultOutcome& out);
  void release_mm_lock(TaskControlBlock& task);
  void note_populated(TaskControlBlock& task, VmaRef vma, PageNo page);
  // Runs `bytes` of service code on the current stack; false when a nested
  // fault left the task blocked.
  bool use_stack(TaskControlBlock& task, std::uint64_t bytes);

  TaskId reschedule(bool voluntary);

  WaitQueue& sleep_queue(TaskId id);
  WaitQueue& poll_queue(TaskId id);
  BodyStatus service_body(TaskControlBlock& task, SyscallRequest& req, ServiceResult& out, WaitQueue*& wq);
  BodyStatus io_body(TaskControlBlock& task, IoDirection dir, int fd, std::uint64_t length, const Bytes& data,
                     bool full_path, ServiceResult& out, WaitQueue*& wq);
  BodyStatus poll_body(TaskControlBlock& task, const ServiceArgs& args, ServiceResult& out, WaitQueue*& wq);
  BodyStatus mmap_body(TaskControlBlock& task, const ServiceArgs& args, ServiceResult& out, WaitQueue*& wq);
  BodyStatus shortcut_body(TaskControlBlock& task, const ShortcutRequest& req, ServiceResult& out,
                           WaitQueue*& wq);
  void transmit(StreamSocket& sock, Bytes bytes);
  void send_segment(StreamSocket& sock, Bytes bytes);
  void close_socket(StreamSocket& sock);
  void handle_event(NodeEvent& ev);

  ExecStatus execute(TaskControlBlock& task, Cycles horizon);
  ExecStatus execute_syscall(TaskControlBlock& task, SyscallRequest& req, Cycles horizon);
  ExecStatus execute_touch(TaskControlBlock& task, const TouchRequest& req);
  ExecStatus wait_or_poll(TaskControlBlock& task, WaitQueue& wq, Cycles horizon);
  void resume(TaskControlBlock& task);
  void terminate(TaskControlBlock& task);

  Simulator* sim_;
  NodeId id_;
  BoundaryConfig config_;
  NodeOptions options_;
  CostLedger ledger_;
  Cycles clock_ = 0;
  Cycles idle_cycles_ = 0;

  std::map<TaskId, std::unique_ptr<TaskControlBlock>> tasks_;
  TaskId next_task_id_ = 1;
  std::optional<TaskId> linked_app_;
  RunQueue rq_;
  std::vector<SwitchRecord> switches_;
  std::uint64_t sched_invocations_ = 0;

  KernelArena arena_;
  std::vector<StackDescriptor> stacks_;
  StackRef fault_stack_;
  StackRef double_fault_stack_;

  std::uint64_t next_frame_serial_ = 1;
  std::set<std::uint64_t> live_frames_;
  std::vector<ReturnInFlight> returns_in_flight_;
  std::uint64_t protocol_returns_ = 0;
  std::multimap<std::uint64_t, ReturnInFlight::Pending> injection_plan_;
  std::function<void(ReturnProtocolStep)> step_hook_;
  std::vector<InterruptObservation> interrupt_log_;
  bool corrupted_ = false;

  std::priority_queue<NodeEvent, std::vector<NodeEvent>, std::greater<NodeEvent>> events_;
  std::uint64_t next_event_seq_ = 0;
  std::map<TaskId, std::unique_ptr<WaitQueue>> sleep_queues_;
  std::map<TaskId, std::unique_ptr<WaitQueue>> poll_queues_;
};

}  // namespace bsim
