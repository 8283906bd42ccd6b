// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>

#include "bsim/error.hpp"
#include "bsim/simulator.hpp"

namespace bsim {

Simulator::Simulator(WeightTable weights) : weights_(weights) {}

Simulator::~Simulator() = default;

Node& Simulator::add_node(BoundaryConfig config, NodeOptions options) {
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::make_unique<Node>(*this, id, config, weights_, std::move(options)));
  return *nodes_.back();
}

std::pair<int, int> Simulator::socket_pair_over_loopback(TaskControlBlock& a, TaskControlBlock& b, bool nodelay) {
  auto make = [&](const TaskControlBlock& owner) -> StreamSocket& {
    auto s = std::make_unique<StreamSocket>();
    s->id = next_socket_++;
    s->node = owner.node;
    s->nodelay = nodelay;
    s->rx_waitq.name = "sock" + std::to_string(s->id) + ".rx";
    s->tx_waitq.name = "sock" + std::to_string(s->id) + ".tx";
    auto& ref = *s;
    sockets_.emplace(ref.id, std::move(s));
    return ref;
  };
  StreamSocket& sa = make(a);
  StreamSocket& sb = make(b);
  sa.peer = sb.id;
  sb.peer = sa.id;
  return {a.files->install(FileObject{sa.id}), b.files->install(FileObject{sb.id})};
}

StreamSocket& Simulator::socket(SocketId id) {
  auto it = sockets_.find(id);
  if (it == sockets_.end()) throw SimError(Errc::BadFd, "no socket " + std::to_string(id));
  return *it->second;
}

void Simulator::inject(SocketId id, const Bytes& bytes) {
  StreamSocket& s = socket(id);
  if (s.rx_buffer.size() + bytes.size() > s.capacity) {
    throw SimError(Errc::BadArgument, "injection exceeds the receive buffer");
  }
  s.rx_buffer.insert(s.rx_buffer.end(), bytes.begin(), bytes.end());
  s.bytes_delivered += bytes.size();
  if (s.peer) {
    StreamSocket& p = socket(*s.peer);
    p.window_used += bytes.size();
    p.bytes_sent += bytes.size();
  }
}

std::uint64_t Simulator::drain(SocketId id) {
  StreamSocket& s = socket(id);
  const std::uint64_t n = s.rx_buffer.size();
  s.rx_buffer.clear();
  s.bytes_consumed += n;
  if (s.peer && n > 0) {
    StreamSocket& p = socket(*s.peer);
    NodeEvent ev;
    ev.time = 0;
    ev.kind = NodeEvent::Kind::WindowUpdate;
    ev.socket = p.id;
    ev.credit = n;
    node(p.node).post_event(std::move(ev));
  }
  return n;
}

void Simulator::settle() {
  for (bool any = true; any;) {
    any = false;
    for (auto& n : nodes_) {
      if (n->next_event_time()) {
        n->flush_events();
        any = true;
      }
    }
  }
}

Cycles Simulator::horizon_for(NodeId self) const {
  Cycles h = nodes_[self]->next_event_time().value_or(kNever);
  for (const auto& n : nodes_) {
    if (n->id() == self) continue;
    if (auto a = n->activity_time()) h = std::min(h, *a + weights_.delivery_delay);
  }
  return h;
}

RunResult Simulator::run(std::uint64_t max_steps) {
  RunResult r;
  for (;;) {
    const bool live = std::any_of(nodes_.begin(), nodes_.end(), [](const auto& n) { return n->live_tasks(false) > 0; });
    if (!live) {
      r.finished = true;
      break;
    }
    if (r.steps >= max_steps) break;

    Node* best = nullptr;
    Cycles best_t = kNever;
    for (auto& n : nodes_) {
      if (auto a = n->activity_time(); a && *a < best_t) {
        best_t = *a;
        best = n.get();
      }
    }
    if (!best) {
      for (auto& n : nodes_) {
        std::set<const AddressSpace*> seen;
        for (TaskId id : n->task_ids()) {
          const auto& t = n->task(id);
          if (t.state == TaskState::Terminated || !seen.insert(t.mm.get()).second) continue;
          if (auto rep = deadlock_monitor(*t.mm)) {
            r.deadlock = NodeDeadlock{n->id(), *rep};
            break;
          }
        }
        if (r.deadlock) break;
      }
      break;
    }
    ++r.steps;
    if (!best->runnable()) {
      best->idle_until(best_t);
      best->process_due_events();
      continue;
    }
    best->step(horizon_for(best->id()));
  }
  for (auto& n : nodes_) r.makespan = std::max(r.makespan, n->clock());
  return r;
}

}  // namespace bsim
