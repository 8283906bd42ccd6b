// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <string>

#include "bsim/error.hpp"
#include "bsim/node.hpp"
#include "bsim/simulator.hpp"

namespace bsim {

namespace {

// Splits a kernel command line on blanks. Double quotes group words and are
// stripped; an unmatched quote is an error.
std::vector<std::string> split_cmdline(std::string_view line) {
  std::vector<std::string> words;
  std::string cur;
  bool in_word = false;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      in_word = true;
    } else if (!quoted && (c == ' ' || c == '\t' || c == '\n')) {
      if (in_word) words.push_back(std::move(cur));
      cur.clear();
      in_word = false;
    } else {
      cur.push_back(c);
      in_word = true;
    }
  }
  if (quoted) throw SimError(Errc::BadCmdline, "unterminated quote in kernel command line");
  if (in_word) words.push_back(std::move(cur));
  return words;
}

}  // namespace

Node::Node(Simulator& sim, NodeId id, BoundaryConfig config, const WeightTable& weights, NodeOptions options)
    : sim_(&sim),
      id_(id),
      config_(config),
      options_(std::move(options)),
      ledger_(weights),
      arena_(options_.kernel_budget) {
  ledger_.enable_trace(options_.trace);
  const auto f = options_.stacks.fault;
  fault_stack_ = new_stack(StackKind::FaultDedicated, f, arena_.allocate(f) + f, std::nullopt);
  const auto df = options_.stacks.double_fault;
  double_fault_stack_ = new_stack(StackKind::DoubleFaultDedicated, df, arena_.allocate(df) + df, std::nullopt);
}

StackRef Node::new_stack(StackKind kind, std::uint64_t size, std::uint64_t top, std::optional<VmaRef> vma) {
  StackDescriptor d;
  d.ref = StackRef{kind, static_cast<std::uint32_t>(stacks_.size())};
  d.size = size;
  d.top = top;
  d.low_watermark = kind == StackKind::UserDemandPaged ? top : top - size;
  d.vma = vma;
  stacks_.push_back(d);
  return d.ref;
}

StackDescriptor& Node::stack(StackRef ref) { return stacks_.at(ref.id); }
const StackDescriptor& Node::stack(StackRef ref) const { return stacks_.at(ref.id); }

TaskControlBlock& Node::create_task(PathKind kind, AppEntry entry, TaskId parent, std::shared_ptr<AddressSpace> mm,
                                    std::shared_ptr<FdTable> files) {
  if (live_tasks(true) >= options_.task_cap) {
    throw SimError(Errc::TooManyTasks, "task cap of " + std::to_string(options_.task_cap) + " reached");
  }
  auto owned = std::make_unique<TaskControlBlock>();
  TaskControlBlock& t = *owned;
  t.task_id = next_task_id_;
  t.parent_id = parent;
  t.node = id_;
  t.path_kind = kind;
  t.mm = std::move(mm);
  t.files = std::move(files);

  const auto& sizes = options_.stacks;
  const Vma& sv = t.mm->map_stack(sizes.user);
  const StackRef paged = new_stack(StackKind::UserDemandPaged, sizes.user, sv.end * kPageSize, sv.ref);
  t.kernel_stack = new_stack(StackKind::KernelPinned, sizes.kernel, arena_.allocate(sizes.kernel) + sizes.kernel,
                             std::nullopt);
  t.user_stack = paged;
  if (kind == PathKind::LinkedApp) {
    t.saved_stack_vma = sv.ref;
    if (config_.nss_ps()) {
      const auto n = sizes.nss_pinned;
      t.user_stack = new_stack(StackKind::NssPinnedUser, n, arena_.allocate(n) + n, std::nullopt);
    }
  }
  t.current_stack = t.user_stack;

  ++next_task_id_;
  tasks_.emplace(t.task_id, std::move(owned));
  t.entry = std::move(entry);
  if (t.entry) t.program = t.entry(TaskApi(*this, t));
  t.state = TaskState::Ready;
  rq_.push_ready(t.task_id);
  return t;
}

TaskControlBlock& Node::launch_linked_app(AppEntry entry, std::string_view kernel_cmdline) {
  if (linked_app_) throw SimError(Errc::SecondLinkedApp, "a linked application is already running");
  const auto words = split_cmdline(kernel_cmdline);
  std::vector<std::string> args;
  auto delim = std::find(words.begin(), words.end(), "--");
  if (delim != words.end()) args.assign(delim + 1, words.end());

  auto mm = std::make_shared<AddressSpace>(arena_);
  TaskControlBlock& t = create_task(PathKind::LinkedApp, std::move(entry), 0, std::move(mm),
                                    std::make_shared<FdTable>());
  t.cmdline = std::move(args);
  linked_app_ = t.task_id;
  return t;
}

TaskControlBlock& Node::spawn_process(AppEntry entry, std::vector<std::string> args, TaskId parent) {
  TaskControlBlock& t = create_task(PathKind::TrapProcess, std::move(entry), parent,
                                    std::make_shared<AddressSpace>(arena_), std::make_shared<FdTable>());
  t.cmdline = std::move(args);
  return t;
}

TaskControlBlock& Node::task(TaskId id) {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw SimError(Errc::BadArgument, "no task " + std::to_string(id));
  return *it->second;
}

const TaskControlBlock& Node::task(TaskId id) const {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw SimError(Errc::BadArgument, "no task " + std::to_string(id));
  return *it->second;
}

std::vector<TaskId> Node::task_ids() const {
  std::vector<TaskId> ids;
  for (const auto& [id, _] : tasks_) ids.push_back(id);
  return ids;
}

std::size_t Node::live_tasks(bool include_daemons) const {
  return static_cast<std::size_t>(std::count_if(tasks_.begin(), tasks_.end(), [&](const auto& kv) {
    const auto& t = *kv.second;
    return t.state != TaskState::Terminated && (include_daemons || !t.daemon);
  }));
}

void Node::charge(CostEvent ev, TaskId task, std::uint64_t count) {
  ledger_.record(ev, task, count);
  clock_ += ledger_.weights()[ev] * count;
}

std::uint64_t Node::next_stack_page(const TaskControlBlock& task) const {
  VmaRef ref;
  if (task.saved_stack_vma) {
    ref = *task.saved_stack_vma;
  } else {
    const auto& d = stack(task.user_stack);
    if (!d.vma) throw SimError(Errc::BadArgument, "task has no demand-paged stack");
    ref = *d.vma;
  }
  const Vma& v = task.mm->vma(ref);
  const PageNo p = task.mm->populated(v.start) ? v.start - 1 : v.start;
  return p * kPageSize;
}

}  // namespace bsim
