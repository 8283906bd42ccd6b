// SPDX-License-Identifier: Apache-2.0
#include "bsim/error.hpp"

namespace bsim {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ConflictingFlags: return "ConflictingFlags";
    case Errc::FlagsRequireLinked: return "FlagsRequireLinked";
    case Errc::MissingFaultPolicy: return "MissingFaultPolicy";
    case Errc::SecondLinkedApp: return "SecondLinkedApp";
    case Errc::BadCmdline: return "BadCmdline";
    case Errc::TooManyTasks: return "TooManyTasks";
    case Errc::ReentrantEnter: return "ReentrantEnter";
    case Errc::FrameReuse: return "FrameReuse";
    case Errc::BypassOnTrapProcess: return "BypassOnTrapProcess";
    case Errc::NoReturnInFlight: return "NoReturnInFlight";
    case Errc::AddressSpaceExhausted: return "AddressSpaceExhausted";
    case Errc::MmLockHeld: return "MmLockHeld";
    case Errc::SegFault: return "SegFault";
    case Errc::TripleFault: return "TripleFault";
    case Errc::KernelExecOnTrapProcess: return "KernelExecOnTrapProcess";
    case Errc::BadFd: return "BadFd";
    case Errc::PeerClosed: return "PeerClosed";
    case Errc::ShortcutOnTrapProcess: return "ShortcutOnTrapProcess";
    case Errc::EmptyAfterDiscard: return "EmptyAfterDiscard";
    case Errc::WouldBlock: return "WouldBlock";
    case Errc::BadWeights: return "BadWeights";
    case Errc::BadArgument: return "BadArgument";
    case Errc::IoError: return "IoError";
    case Errc::Stalled: return "Stalled";
  }
  return "Unknown";
}

SimError::SimError(Errc code, std::string_view detail)
    : std::runtime_error(std::string(errc_name(code)) +
                         (detail.empty() ? "" : ": ") + std::string(detail)),
      code_(code) {}

}  // namespace bsim
