// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsim {

enum class Errc {
  ConflictingFlags,
  FlagsRequireLinked,
  MissingFaultPolicy,
  SecondLinkedApp,
  BadCmdline,
  TooManyTasks,
  ReentrantEnter,
  FrameReuse,
  BypassOnTrapProcess,
  NoReturnInFlight,
  AddressSpaceExhausted,
  MmLockHeld,
  SegFault,
  TripleFault,
  KernelExecOnTrapProcess,
  BadFd,
  PeerClosed,
  ShortcutOnTrapProcess,
  EmptyAfterDiscard,
  WouldBlock,
  BadWeights,
  BadArgument,
  IoError,
  Stalled,
};

std::string_view errc_name(Errc code) noexcept;

// All simulator failures carry one of the error constants above; what()
// always starts with the constant's name.
class SimError : public std::runtime_error {
 public:
  SimError(Errc code, std::string_view detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace bsim
