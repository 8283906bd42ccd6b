// SPDX-License-Identifier: Apache-2.0
#include "bsim/error.hpp"
#include "bsim/node.hpp"

namespace bsim {

Vma Node::mmap_region(TaskControlBlock& task, std::uint64_t length, VmaKind kind, bool pinned) {
  AddressSpace& mm = *task.mm;
  switch (mm.try_lock(task.task_id)) {
    case LockAttempt::HeldBySelf:
      throw SimError(Errc::MmLockHeld, "task " + std::to_string(task.task_id) + " already holds mm_lock");
    case LockAttempt::HeldByOther:
      throw SimError(Errc::WouldBlock, "mm_lock held by task " + std::to_string(*mm.mm_lock().owner));
    case LockAttempt::Acquired:
      break;
  }
  try {
    Vma v = mm.map_region(length, kind, pinned);
    release_mm_lock(task);
    return v;
  } catch (...) {
    release_mm_lock(task);
    throw;
  }
}

void Node::release_mm_lock(TaskControlBlock& task) {
  task.mm->unlock(task.task_id);
  wake_one(task.mm->mm_lock().wq);
}

std::optional<Frame> Node::fault_begin(TaskControlBlock& task, std::uint64_t addr, FaultOutcome& out) {
  AddressSpace& mm = *task.mm;
  const PageNo page = page_of(addr);
  if (mm.populated(page)) return std::nullopt;
  const Vma* v = mm.find(page);
  const Vma* grow = v ? nullptr : mm.find_growth_candidate(page);
  if (!v && !grow) throw SimError(Errc::SegFault, "no mapping for page " + std::to_string(page));
  if (v && v->pinned) return std::nullopt;

  out.faulted = true;
  charge(CostEvent::PageFaultVector, task.task_id);
  Frame f = kernel_enter(task, EntryCause::Fault);

  const StackDescriptor& interrupted = stack(f.saved_stack);
  const VmaRef target = v ? v->ref : grow->ref;
  const bool stack_fault = interrupted.ref.kind == StackKind::UserDemandPaged && interrupted.vma == target;

  StackRef handler = task.kernel_stack;
  if (f.trap_path) {
    handler = task.kernel_stack;
  } else if (config_.pf_ss()) {
    if (config_.shares_stack() || f.nested) charge(CostEvent::StackSwitch, task.task_id);
    handler = fault_stack_;
  } else if (config_.shares_stack() && stack_fault) {
    // The hardware cannot push the fault frame onto the faulting stack.
    if (!config_.pf_df()) {
      live_frames_.erase(f.serial);
      throw SimError(Errc::TripleFault, "stack fault on the current stack with no fault-stack policy");
    }
    charge(CostEvent::DoubleFaultVector, task.task_id);
    charge(CostEvent::StackSwitch, task.task_id);
    if (!stack(double_fault_stack_).never_faults()) {
      live_frames_.erase(f.serial);
      throw SimError(Errc::TripleFault, "double-fault stack is not pinned");
    }
    handler = double_fault_stack_;
    out.via_double_fault = true;
  } else if (config_.shares_stack()) {
    handler = task.current_stack;
  }
  task.current_stack = handler;
  out.handler_stack = stack(handler).ref.kind;
  return f;
}

FaultOutcome Node::handle_page_fault(TaskControlBlock& task, std::uint64_t addr) {
  FaultOutcome out;
  out.faulted = true;
  out.handler_stack = stack(task.current_stack).ref.kind;
  AddressSpace& mm = *task.mm;
  const PageNo page = page_of(addr);

  if (options_.fault_fast_path && task.saved_stack_vma) {
    const Vma& sv = mm.vma(*task.saved_stack_vma);
    const bool grow = page + 1 == sv.start && page >= sv.growth_floor;
    if (sv.contains(page) || grow) {
      if (grow) mm.grow_to(sv.ref, page);
      mm.populate(page);
      note_populated(task, sv.ref, page);
      out.fast_path = true;
      return out;
    }
  }

  if (mm.try_lock(task.task_id) != LockAttempt::Acquired) {
    block_on(task, mm.mm_lock().wq);
    out.blocked = true;
    return out;
  }
  const Vma* v = mm.find(page);
  if (!v) {
    if (const Vma* g = mm.find_growth_candidate(page)) {
      mm.grow_to(g->ref, page);
      v = g;
    }
  }
  if (!v) {
    release_mm_lock(task);
    throw SimError(Errc::SegFault, "no mapping for page " + std::to_string(page));
  }
  mm.populate(page);
  note_populated(task, v->ref, page);
  release_mm_lock(task);
  return out;
}

void Node::note_populated(TaskControlBlock& task, VmaRef vma, PageNo page) {
  StackDescriptor& d = stack(task.user_stack);
  if (d.vma == vma && page * kPageSize < d.low_watermark) d.low_watermark = page * kPageSize;
}

FaultOutcome Node::touch_page(TaskControlBlock& task, std::uint64_t addr) {
  FaultOutcome out;
  std::optional<Frame> f = fault_begin(task, addr, out);
  if (!f) return out;
  const FaultOutcome h = handle_page_fault(task, addr);
  out.fast_path = h.fast_path;
  if (h.blocked) {
    out.blocked = true;
    return out;
  }
  kernel_exit(task, *f);
  return out;
}

bool Node::use_stack(TaskControlBlock& task, std::uint64_t bytes) {
  const StackDescriptor d = stack(task.current_stack);
  if (d.never_faults() || bytes == 0) return true;
  const std::uint64_t pages = pages_for(bytes);
  for (std::uint64_t i = 1; i <= pages; ++i) {
    const FaultOutcome o = touch_page(task, d.top - i * kPageSize);
    if (o.blocked) return false;
  }
  return true;
}

}  // namespace bsim
