// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "bsim/error.hpp"
#include "bsim/node.hpp"
#include "bsim/services.hpp"
#include "bsim/simulator.hpp"

namespace bsim {

int FdTable::install(FileObject file) {
  int fd = 3;
  while (fds_.count(fd) != 0) ++fd;
  fds_.emplace(fd, file);
  return fd;
}

void FdTable::close(int fd) {
  if (fds_.erase(fd) == 0) throw SimError(Errc::BadFd, "fd " + std::to_string(fd) + " is not open");
}

const FileObject& FdTable::get(int fd) const {
  auto it = fds_.find(fd);
  if (it == fds_.end()) throw SimError(Errc::BadFd, "fd " + std::to_string(fd) + " is not open");
  return it->second;
}

TaskId Node::sys_getppid(TaskControlBlock& task) { return task.parent_id; }

StreamSocket& Node::socket_for(TaskControlBlock& task, int fd) {
  return sim_->socket(task.files->get(fd).socket);
}

WaitQueue& Node::sleep_queue(TaskId id) {
  auto& q = sleep_queues_[id];
  if (!q) q = std::make_unique<WaitQueue>(WaitQueue{"sleep." + std::to_string(id), {}});
  return *q;
}

Node::BodyStatus Node::service_body(TaskControlBlock& task, SyscallRequest& req, ServiceResult& out,
                                    WaitQueue*& wq) {
  auto& args = req.args;
  switch (req.id) {
    case ServiceId::Getppid:
      if (!task.call.layers_charged) {
        // Only the syscall stub sits between the entry code and the answer.
        charge(CostEvent::DispatchLayer, task.task_id);
        task.call.layers_charged = true;
      }
      out.value = sys_getppid(task);
      return BodyStatus::Done;
    case ServiceId::Read:
      return io_body(task, IoDirection::Read, args.fd, args.length, args.data, true, out, wq);
    case ServiceId::Write:
      return io_body(task, IoDirection::Write, args.fd, args.length, args.data, true, out, wq);
    case ServiceId::SendTo:
      return io_body(task, IoDirection::SendTo, args.fd, args.length, args.data, true, out, wq);
    case ServiceId::RecvFrom:
      return io_body(task, IoDirection::RecvFrom, args.fd, args.length, args.data, true, out, wq);
    case ServiceId::Mmap:
      return mmap_body(task, args, out, wq);
    case ServiceId::Nanosleep: {
      auto& c = task.call;
      if (!c.deadline) {
        c.deadline = clock_ + args.duration;
        if (args.duration > 0) {
          NodeEvent ev;
          ev.time = *c.deadline;
          ev.kind = NodeEvent::Kind::Timer;
          ev.task = task.task_id;
          post_event(std::move(ev));
        }
      }
      if (clock_ >= *c.deadline) return BodyStatus::Done;
      wq = &sleep_queue(task.task_id);
      return BodyStatus::Wait;
    }
    case ServiceId::Poll:
      return poll_body(task, args, out, wq);
    case ServiceId::Close: {
      const SocketId id = task.files->get(args.fd).socket;
      task.files->close(args.fd);
      close_socket(sim_->socket(id));
      return BodyStatus::Done;
    }
  }
  throw SimError(Errc::BadArgument, "unknown service");
}

Node::BodyStatus Node::io_body(TaskControlBlock& task, IoDirection dir, int fd, std::uint64_t length,
                               const Bytes& data, bool full_path, ServiceResult& out, WaitQueue*& wq) {
  StreamSocket& sock = socket_for(task, fd);
  if (full_path && !task.call.layers_charged) {
    charge(CostEvent::DispatchLayer, task.task_id, options_.chain.depth());
    task.call.layers_charged = true;
  }

  if (is_receive(dir)) {
    if (length == 0) return BodyStatus::Done;
    if (sock.rx_buffer.empty()) {
      if (sock.peer_closed) return BodyStatus::Done;  // end of stream reads 0
      wq = &sock.rx_waitq;
      return BodyStatus::Wait;
    }
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(length, sock.rx_buffer.size()));
    out.data.assign(sock.rx_buffer.begin(), sock.rx_buffer.begin() + static_cast<std::ptrdiff_t>(n));
    sock.rx_buffer.erase(sock.rx_buffer.begin(), sock.rx_buffer.begin() + static_cast<std::ptrdiff_t>(n));
    sock.bytes_consumed += n;
    out.value = static_cast<std::int64_t>(n);
    charge(CostEvent::CopyByte, task.task_id, n);
    if (sock.peer) {
      const StreamSocket& peer = sim_->socket(*sock.peer);
      NodeEvent ev;
      ev.time = clock_ + weights().delivery_delay;
      ev.kind = NodeEvent::Kind::WindowUpdate;
      ev.socket = peer.id;
      ev.credit = n;
      sim_->node(peer.node).post_event(std::move(ev));
    }
    return BodyStatus::Done;
  }

  if (!sock.peer) throw SimError(Errc::PeerClosed, "socket has no peer");
  if (sim_->socket(*sock.peer).closed) throw SimError(Errc::PeerClosed, "peer end of fd " + std::to_string(fd) + " is closed");
  if (data.empty()) return BodyStatus::Done;
  const std::uint64_t space = sock.capacity - sock.window_used;
  if (space == 0) {
    wq = &sock.tx_waitq;
    return BodyStatus::Wait;
  }
  const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(data.size(), space));
  charge(CostEvent::CopyByte, task.task_id, n);
  sock.window_used += n;
  sock.bytes_sent += n;
  out.value = static_cast<std::int64_t>(n);
  transmit(sock, Bytes(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n)));
  return BodyStatus::Done;
}

WaitQueue& Node::poll_queue(TaskId id) {
  auto& q = poll_queues_[id];
  if (!q) q = std::make_unique<WaitQueue>(WaitQueue{"poll." + std::to_string(id), {}});
  return *q;
}

Node::BodyStatus Node::poll_body(TaskControlBlock& task, const ServiceArgs& args, ServiceResult& out,
                                 WaitQueue*& wq) {
  if (!task.call.layers_charged) {
    charge(CostEvent::DispatchLayer, task.task_id);
    task.call.layers_charged = true;
  }
  if (args.fds.empty()) throw SimError(Errc::BadArgument, "poll needs at least one descriptor");
  WaitQueue& q = poll_queue(task.task_id);
  for (int fd : args.fds) {
    StreamSocket& s = socket_for(task, fd);
    if (!s.rx_buffer.empty() || s.peer_closed) out.ready.push_back(fd);
  }
  for (int fd : args.fds) {
    StreamSocket& s = socket_for(task, fd);
    s.poller = out.ready.empty() ? &q : nullptr;
  }
  if (!out.ready.empty()) {
    out.value = static_cast<std::int64_t>(out.ready.size());
    return BodyStatus::Done;
  }
  wq = &q;
  return BodyStatus::Wait;
}

Node::BodyStatus Node::mmap_body(TaskControlBlock& task, const ServiceArgs& args, ServiceResult& out,
                                 WaitQueue*& wq) {
  AddressSpace& mm = *task.mm;
  switch (mm.try_lock(task.task_id)) {
    case LockAttempt::HeldBySelf:
      throw SimError(Errc::MmLockHeld, "task " + std::to_string(task.task_id) + " already holds mm_lock");
    case LockAttempt::HeldByOther:
      wq = &mm.mm_lock().wq;
      return BodyStatus::Wait;
    case LockAttempt::Acquired:
      break;
  }
  try {
    const Vma& v = mm.map_region(args.length, args.kind, args.pinned);
    out.vma = v.ref;
    out.value = static_cast<std::int64_t>(v.start * kPageSize);
  } catch (...) {
    release_mm_lock(task);
    throw;
  }
  // The service keeps working on the current stack with the lock held.
  if (!use_stack(task, args.stack_bytes)) {
    wq = &mm.mm_lock().wq;
    return BodyStatus::Stuck;
  }
  release_mm_lock(task);
  return BodyStatus::Done;
}

void Node::transmit(StreamSocket& sock, Bytes bytes) {
  if (!sock.nodelay && sock.outstanding_segments > 0) {
    sock.held.insert(sock.held.end(), bytes.begin(), bytes.end());
    return;
  }
  send_segment(sock, std::move(bytes));
}

void Node::send_segment(StreamSocket& sock, Bytes bytes) {
  ++sock.segments_sent;
  if (!sock.nodelay) ++sock.outstanding_segments;
  const StreamSocket& peer = sim_->socket(*sock.peer);
  NodeEvent ev;
  ev.time = clock_ + weights().delivery_delay;
  ev.kind = NodeEvent::Kind::Arrival;
  ev.socket = peer.id;
  ev.bytes = std::move(bytes);
  sim_->node(peer.node).post_event(std::move(ev));
}

void Node::close_socket(StreamSocket& sock) {
  if (sock.closed) return;
  sock.closed = true;
  if (!sock.peer) return;
  if (!sock.held.empty()) send_segment(sock, std::exchange(sock.held, {}));
  const StreamSocket& peer = sim_->socket(*sock.peer);
  NodeEvent ev;
  ev.time = clock_ + weights().delivery_delay;
  ev.kind = NodeEvent::Kind::Fin;
  ev.socket = peer.id;
  sim_->node(peer.node).post_event(std::move(ev));
}

void Node::handle_event(NodeEvent& ev) {
  switch (ev.kind) {
    case NodeEvent::Kind::Arrival: {
      StreamSocket& sock = sim_->socket(ev.socket);
      sock.rx_buffer.insert(sock.rx_buffer.end(), ev.bytes.begin(), ev.bytes.end());
      sock.bytes_delivered += ev.bytes.size();
      if (sock.peer) {
        const StreamSocket& sender = sim_->socket(*sock.peer);
        if (!sender.nodelay) {
          NodeEvent ack;
          ack.time = clock_ + weights().delivery_delay;
          ack.kind = NodeEvent::Kind::Ack;
          ack.socket = sender.id;
          sim_->node(sender.node).post_event(std::move(ack));
        }
      }
      wake_one(sock.rx_waitq);
      if (sock.poller) wake_one(*sock.poller);
      break;
    }
    case NodeEvent::Kind::WindowUpdate: {
      StreamSocket& sock = sim_->socket(ev.socket);
      sock.window_used -= std::min(sock.window_used, ev.credit);
      wake_one(sock.tx_waitq);
      break;
    }
    case NodeEvent::Kind::Ack: {
      StreamSocket& sock = sim_->socket(ev.socket);
      if (sock.outstanding_segments > 0) --sock.outstanding_segments;
      if (sock.outstanding_segments == 0 && !sock.held.empty() && !sock.closed) {
        send_segment(sock, std::exchange(sock.held, {}));
      }
      break;
    }
    case NodeEvent::Kind::Fin: {
      StreamSocket& sock = sim_->socket(ev.socket);
      sock.peer_closed = true;
      wake_one(sock.rx_waitq);
      if (sock.poller) wake_one(*sock.poller);
      break;
    }
    case NodeEvent::Kind::Timer: {
      auto it = sleep_queues_.find(ev.task);
      if (it != sleep_queues_.end()) wake_one(*it->second);
      break;
    }
  }
}

Node::BodyStatus Node::shortcut_body(TaskControlBlock& task, const ShortcutRequest& req, ServiceResult& out,
                                     WaitQueue*& wq) {
  if (task.path_kind != PathKind::LinkedApp) {
    throw SimError(Errc::ShortcutOnTrapProcess, "task " + std::to_string(task.task_id) + " is a trap process");
  }
  const auto dir = req.send ? IoDirection::Write : IoDirection::Read;
  const std::uint64_t length = req.send ? req.data.size() : req.length;
  return io_body(task, dir, req.fd, length, req.data, false, out, wq);
}

ServiceResult Node::shortcut_send(TaskControlBlock& task, int fd, Bytes data) {
  ShortcutRequest req{true, fd, std::move(data), 0};
  ServiceResult out;
  WaitQueue* wq = nullptr;
  if (shortcut_body(task, req, out, wq) != BodyStatus::Done) {
    throw SimError(Errc::WouldBlock, "shortcut send would sleep on " + wq->name);
  }
  return out;
}

ServiceResult Node::shortcut_recv(TaskControlBlock& task, int fd, std::uint64_t length) {
  ShortcutRequest req{false, fd, {}, length};
  ServiceResult out;
  WaitQueue* wq = nullptr;
  if (shortcut_body(task, req, out, wq) != BodyStatus::Done) {
    throw SimError(Errc::WouldBlock, "shortcut receive would sleep on " + wq->name);
  }
  return out;
}

}  // namespace bsim
