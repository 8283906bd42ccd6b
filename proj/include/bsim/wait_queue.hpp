// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <string>

namespace bsim {

struct WaitQueue {
  std::string name;
  std::deque<std::uint32_t> waiters;  // task ids, FIFO wake order
};

}  // namespace bsim
