// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <functional>
#include <stdexcept>

#include "bsim/error.hpp"
#include "bsim/memsim.hpp"

namespace bsim {

std::uint64_t KernelArena::allocate(std::uint64_t bytes) {
  const std::uint64_t rounded = pages_for(bytes) * kPageSize;
  if (used_ + rounded > budget_) {
    throw SimError(Errc::AddressSpaceExhausted,
                   "kernel range budget of " + std::to_string(budget_) + " bytes exceeded");
  }
  const std::uint64_t base = kBase + used_;
  used_ += rounded;
  return base;
}

Vma& AddressSpace::insert(PageNo start, PageNo end, VmaKind kind, bool pinned, PageNo floor) {
  Vma v;
  v.ref = VmaRef{next_vma_id_++};
  v.start = start;
  v.end = end;
  v.kind = kind;
  v.pinned = pinned;
  v.growth_floor = floor;
  return vmas_.emplace(v.ref.id, v).first->second;
}

const Vma& AddressSpace::map_region(std::uint64_t bytes, VmaKind kind, bool pinned) {
  if (bytes == 0) throw SimError(Errc::BadArgument, "zero-length mapping");
  const std::uint64_t npages = pages_for(bytes);
  if (pinned) {
    const PageNo start = page_of(arena_->allocate(bytes));
    return insert(start, start + npages, kind, true, start);
  }
  if (mmap_cursor_ + npages >= stack_cursor_) {
    throw SimError(Errc::AddressSpaceExhausted, "user range exhausted");
  }
  const PageNo start = mmap_cursor_;
  mmap_cursor_ += npages + 1;  // one unmapped page between regions
  return insert(start, start + npages, kind, false, start);
}

const Vma& AddressSpace::map_stack(std::uint64_t max_bytes) {
  const std::uint64_t slot = pages_for(max_bytes);
  if (stack_cursor_ < mmap_cursor_ + slot + 1) {
    throw SimError(Errc::AddressSpaceExhausted, "user range exhausted by stacks");
  }
  const PageNo top = stack_cursor_;
  const PageNo floor = top - slot;
  stack_cursor_ = floor - 1;  // guard page below each slot
  return insert(top - 1, top, VmaKind::Stack, false, floor);
}

const Vma* AddressSpace::find(PageNo page) const {
  for (const auto& [id, v] : vmas_) {
    if (v.contains(page)) return &v;
  }
  return nullptr;
}

const Vma* AddressSpace::find_growth_candidate(PageNo page) const {
  for (const auto& [id, v] : vmas_) {
    if (v.kind == VmaKind::Stack && !v.pinned && v.start > v.growth_floor && page + 1 == v.start) {
      return &v;
    }
  }
  return nullptr;
}

const Vma& AddressSpace::vma(VmaRef ref) const {
  auto it = vmas_.find(ref.id);
  if (it == vmas_.end()) throw std::logic_error("unknown VMA reference");
  return it->second;
}

void AddressSpace::grow_to(VmaRef ref, PageNo page) {
  auto& v = vmas_.at(ref.id);
  if (page + 1 != v.start || page < v.growth_floor) throw std::logic_error("illegal stack growth");
  v.start = page;
}

bool AddressSpace::populated(PageNo page) const {
  return arena_->contains(page * kPageSize) || pages_.count(page) != 0;
}

void AddressSpace::populate(PageNo page) {
  if (!arena_->contains(page * kPageSize)) pages_.insert(page);
}

std::uint64_t AddressSpace::page_map_hash() const {
  // FNV-1a over the sorted populated page numbers.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (PageNo p : pages_) {
    for (int i = 0; i < 8; ++i) {
      h ^= (p >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

LockAttempt AddressSpace::try_lock(TaskId task) {
  if (!lock_.owner) {
    lock_.owner = task;
    ++lock_.acquisitions;
    return LockAttempt::Acquired;
  }
  return *lock_.owner == task ? LockAttempt::HeldBySelf : LockAttempt::HeldByOther;
}

void AddressSpace::unlock(TaskId task) {
  if (!lock_.owner || *lock_.owner != task) {
    throw std::logic_error("mm_lock released by a task that does not own it");
  }
  lock_.owner.reset();
  ++lock_.releases;
}

std::optional<DeadlockReport> deadlock_monitor(const AddressSpace& space) {
  const MmLock& lock = space.mm_lock();
  if (!lock.owner) return std::nullopt;

  // Wait-for edges: every waiter waits for the owner. With a single lock a
  // cycle can only close through the owner, but the search is kept general.
  std::map<TaskId, std::vector<TaskId>> edges;
  for (TaskId w : lock.wq.waiters) edges[w].push_back(*lock.owner);

  std::map<TaskId, int> color;  // 0 white, 1 on stack, 2 done
  std::vector<TaskId> path;
  std::optional<DeadlockReport> found;
  std::function<void(TaskId)> dfs = [&](TaskId t) {
    if (found) return;
    color[t] = 1;
    path.push_back(t);
    for (TaskId next : edges[t]) {
      if (color[next] == 1) {
        DeadlockReport r;
        auto it = std::find(path.begin(), path.end(), next);
        r.cycle.assign(it, path.end());
        found = r;
        return;
      }
      if (color[next] == 0) dfs(next);
      if (found) return;
    }
    path.pop_back();
    color[t] = 2;
  };
  for (const auto& [t, _] : edges) {
    if (color[t] == 0) dfs(t);
    if (found) break;
  }
  return found;
}

}  // namespace bsim
