// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "bsim/cost.hpp"
#include "bsim/memsim.hpp"

namespace bsim {

using NodeId = std::uint32_t;
using Byte = std::uint8_t;
using Bytes = std::vector<Byte>;

inline constexpr TaskId kIdleTask = 0;

enum class ExecMode { Application, Kernel };

enum class PathKind { TrapProcess, LinkedApp };

enum class EntryCause { Syscall, Fault, Interrupt };

enum CloneFlags : std::uint32_t {
  kCloneNone = 0,
  kCloneVm = 1u << 0,
  kCloneUkl = 1u << 1,
};

inline constexpr CloneFlags operator|(CloneFlags a, CloneFlags b) {
  return static_cast<CloneFlags>(static_cast<std::uint32_t>(a) | static_cast<std::uint32_t>(b));
}

enum class ServiceId { Getppid, Read, Write, SendTo, RecvFrom, Mmap, Nanosleep, Close, Poll };

enum class IoDirection { Read, Write, SendTo, RecvFrom };

inline constexpr bool is_receive(IoDirection d) noexcept {
  return d == IoDirection::Read || d == IoDirection::RecvFrom;
}

struct ServiceArgs {
  int fd = -1;
  std::uint64_t length = 0;
  Bytes data;                    // payload for Write/SendTo
  VmaKind kind = VmaKind::Mmap;  // Mmap
  bool pinned = false;           // Mmap: vmalloc-style pinned kernel memory
  std::uint64_t stack_bytes = 0; // Mmap: stack depth used while holding mm_lock
  Cycles duration = 0;           // Nanosleep
  std::vector<int> fds;          // Poll: descriptors to watch for input
};

struct ServiceResult {
  std::int64_t value = 0;
  Bytes data;
  std::optional<VmaRef> vma;
  std::vector<int> ready;  // Poll: readable descriptors, in request order

  friend bool operator==(const ServiceResult&, const ServiceResult&) = default;
};

struct FlagsWord {
  bool interrupts_enabled = true;
  friend bool operator==(const FlagsWord&, const FlagsWord&) = default;
};

// State captured on kernel entry and consumed exactly once on return.
struct Frame {
  std::uint64_t return_target = 0;
  FlagsWord saved_flags;
  StackRef saved_stack;
  EntryCause entered_via = EntryCause::Syscall;
  bool bypassed = false;  // entry skipped; exit must skip too
  bool nested = false;    // entered while already in kernel mode
  bool trap_path = false;
  std::uint64_t serial = 0;
};

enum class ReturnProtocolStep : std::uint8_t {
  CopyRetAddrToUserStack,
  CopyFlagsToUserStack,
  SwitchToUserStack,
  PopFlags,
  PlainReturn,
};

inline constexpr std::size_t kReturnProtocolSteps = 5;

std::string_view step_name(ReturnProtocolStep step) noexcept;

// What happened on one memory touch.
struct FaultOutcome {
  bool faulted = false;
  bool via_double_fault = false;
  bool fast_path = false;        // stack VMA matched without taking mm_lock
  bool blocked = false;          // handler is waiting on mm_lock
  StackKind handler_stack = StackKind::KernelPinned;

  friend bool operator==(const FaultOutcome&, const FaultOutcome&) = default;
};

}  // namespace bsim
