// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bsim/sched.hpp"
#include "bsim/types.hpp"

namespace bsim {

using SocketId = std::uint32_t;

struct FileObject {
  SocketId socket = 0;
};

// Per-process descriptor table; 0-2 are reserved, new descriptors take the
// lowest free number from 3 up.
class FdTable {
 public:
  int install(FileObject file);
  void close(int fd);
  const FileObject& get(int fd) const;
  bool contains(int fd) const noexcept { return fds_.count(fd) != 0; }
  std::size_t size() const noexcept { return fds_.size(); }

 private:
  std::map<int, FileObject> fds_;
};

// The layered path a full-path I/O call walks before reaching the transport.
struct DispatchChain {
  std::vector<std::string> layers{"syscall_stub", "vfs", "file_ops", "socket_glue", "protocol"};

  std::uint64_t depth() const noexcept { return layers.size(); }
};

struct StreamSocket {
  SocketId id = 0;
  NodeId node = 0;
  std::optional<SocketId> peer;
  std::deque<Byte> rx_buffer;
  std::size_t capacity = 64 * 1024;
  bool nodelay = true;
  WaitQueue rx_waitq;
  WaitQueue tx_waitq;
  WaitQueue* poller = nullptr;  // task blocked in poll on this socket

  // Sender-side view of the peer's receive window.
  std::uint64_t window_used = 0;
  // Segments sent and not yet acknowledged; only tracked without nodelay.
  std::uint64_t outstanding_segments = 0;
  Bytes held;  // coalesced bytes waiting for the outstanding segment's ack

  bool closed = false;       // this end shut down
  bool peer_closed = false;  // end-of-stream has arrived

  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_delivered = 0;  // arrived into rx_buffer
  std::uint64_t bytes_consumed = 0;   // read by the application
  std::uint64_t segments_sent = 0;
};

}  // namespace bsim
