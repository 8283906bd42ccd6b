// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "bsim/cost.hpp"
#include "bsim/wait_queue.hpp"

namespace bsim {

inline constexpr std::uint64_t kPageSize = 4096;
using PageNo = std::uint64_t;

inline constexpr PageNo page_of(std::uint64_t addr) noexcept { return addr / kPageSize; }
inline constexpr std::uint64_t pages_for(std::uint64_t bytes) noexcept {
  return (bytes + kPageSize - 1) / kPageSize;
}

// Sizes used for every task's stacks.
struct StackSizes {
  std::uint64_t user = 8ull << 20;        // demand-paged, grows down
  std::uint64_t kernel = 16ull << 10;     // pinned
  std::uint64_t nss_pinned = 1ull << 20;  // pinned user stack in the kernel range
  std::uint64_t fault = 16ull << 10;      // dedicated page-fault stack
  std::uint64_t double_fault = 16ull << 10;
};

enum class VmaKind { Stack, Mmap, Heap };

struct VmaRef {
  std::uint32_t id = 0;
  friend bool operator==(const VmaRef&, const VmaRef&) = default;
};

// [start, end) in pages. Stack VMAs may grow down one page at a time as long
// as start stays >= growth_floor.
struct Vma {
  VmaRef ref;
  PageNo start = 0;
  PageNo end = 0;
  VmaKind kind = VmaKind::Mmap;
  bool pinned = false;
  PageNo growth_floor = 0;

  bool contains(PageNo p) const noexcept { return p >= start && p < end; }
  std::uint64_t pages() const noexcept { return end - start; }
};

enum class StackKind { UserDemandPaged, KernelPinned, NssPinnedUser, FaultDedicated, DoubleFaultDedicated };

struct StackRef {
  StackKind kind = StackKind::KernelPinned;
  std::uint32_t id = 0;
  friend bool operator==(const StackRef&, const StackRef&) = default;
};

struct StackDescriptor {
  StackRef ref;
  std::uint64_t size = 0;
  std::uint64_t top = 0;            // highest address + 1
  std::uint64_t low_watermark = 0;  // lowest address currently usable
  std::optional<VmaRef> vma;        // backing VMA for user-side stacks

  bool never_faults() const noexcept { return ref.kind != StackKind::UserDemandPaged; }
};

// The kernel half of the address space. Pinned allocations (kernel stacks,
// pinned user stacks, vmalloc-style buffers) draw from one budget.
class KernelArena {
 public:
  static constexpr std::uint64_t kBase = 0xffff'8000'0000'0000ull;

  explicit KernelArena(std::uint64_t budget_bytes = 64ull << 20) : budget_(budget_bytes) {}

  // Returns the base address; throws AddressSpaceExhausted past the budget.
  std::uint64_t allocate(std::uint64_t bytes);

  bool contains(std::uint64_t addr) const noexcept { return addr >= kBase; }
  std::uint64_t used() const noexcept { return used_; }
  std::uint64_t budget() const noexcept { return budget_; }

 private:
  std::uint64_t budget_;
  std::uint64_t used_ = 0;
};

enum class LockAttempt { Acquired, HeldBySelf, HeldByOther };

struct MmLock {
  std::optional<TaskId> owner;
  WaitQueue wq{"mm_lock", {}};
  std::uint64_t acquisitions = 0;
  std::uint64_t releases = 0;
};

struct DeadlockReport {
  std::vector<TaskId> cycle;
};

// One process's view: user VMAs with demand paging plus the shared kernel
// range, which is always populated.
class AddressSpace {
 public:
  static constexpr PageNo kMmapBasePage = 0x10000;        // 256 MiB
  static constexpr PageNo kStackTopPage = 0x7fff'f000;    // just under 8 TiB

  explicit AddressSpace(KernelArena& arena) : arena_(&arena) {}

  // Raw mapping used by task creation and by mmap_region (which adds the
  // locking). Pinned regions come from the kernel arena and are populated.
  const Vma& map_region(std::uint64_t bytes, VmaKind kind, bool pinned);
  // A new demand-paged stack slot: one absent page at the top, growable down
  // to `max_bytes`.
  const Vma& map_stack(std::uint64_t max_bytes);

  const Vma* find(PageNo page) const;
  // The stack VMA for which `page` is exactly one page below start.
  const Vma* find_growth_candidate(PageNo page) const;
  const Vma& vma(VmaRef ref) const;
  // Extends a stack VMA down to include `page`.
  void grow_to(VmaRef ref, PageNo page);

  bool populated(PageNo page) const;
  void populate(PageNo page);
  const std::set<PageNo>& populated_pages() const noexcept { return pages_; }
  std::uint64_t page_map_hash() const;

  LockAttempt try_lock(TaskId task);
  // Throws std::logic_error when `task` is not the owner.
  void unlock(TaskId task);
  MmLock& mm_lock() noexcept { return lock_; }
  const MmLock& mm_lock() const noexcept { return lock_; }

  std::size_t vma_count() const noexcept { return vmas_.size(); }
  KernelArena& arena() noexcept { return *arena_; }

 private:
  Vma& insert(PageNo start, PageNo end, VmaKind kind, bool pinned, PageNo floor);

  KernelArena* arena_;
  std::map<std::uint32_t, Vma> vmas_;
  std::uint32_t next_vma_id_ = 1;
  PageNo mmap_cursor_ = kMmapBasePage;
  PageNo stack_cursor_ = kStackTopPage;
  std::set<PageNo> pages_;
  MmLock lock_;
};

// Reports a cycle in the wait-for graph over the mm lock, including an owner
// waiting on its own lock.
std::optional<DeadlockReport> deadlock_monitor(const AddressSpace& space);

}  // namespace bsim
