// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "bsim/node.hpp"

namespace bsim {

inline constexpr Cycles kNever = std::numeric_limits<Cycles>::max();

struct NodeDeadlock {
  NodeId node = 0;
  DeadlockReport report;
};

struct RunResult {
  bool finished = false;  // every non-daemon task terminated
  std::optional<NodeDeadlock> deadlock;
  std::uint64_t steps = 0;
  Cycles makespan = 0;  // latest node clock when the run stopped
};

// A set of nodes sharing one weight table and a loopback network. The run
// loop always advances the node with the earliest pending activity, so the
// interleaving is a pure function of the inputs.
class Simulator {
 public:
  explicit Simulator(WeightTable weights = default_weights());
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;
  ~Simulator();

  Node& add_node(BoundaryConfig config, NodeOptions options = {});
  Node& node(NodeId id) { return *nodes_.at(id); }
  const Node& node(NodeId id) const { return *nodes_.at(id); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const WeightTable& weights() const noexcept { return weights_; }

  // Connects two tasks (possibly on different nodes) with a stream socket
  // pair and returns the descriptors installed in each task's table.
  std::pair<int, int> socket_pair_over_loopback(TaskControlBlock& a, TaskControlBlock& b,
                                                bool nodelay = true);
  StreamSocket& socket(SocketId id);
  std::size_t socket_count() const noexcept { return sockets_.size(); }

  // Harness helpers for synchronous benchmarks: place bytes straight into a
  // receive buffer as if the peer had sent them, consume a receive buffer as
  // if its reader had, and deliver every queued network event immediately.
  void inject(SocketId id, const Bytes& bytes);
  std::uint64_t drain(SocketId id);
  void settle();

  RunResult run(std::uint64_t max_steps = 2'000'000'000ull);

  // Earliest time any node other than `self` could put something on the
  // wire toward it.
  Cycles horizon_for(NodeId self) const;

 private:
  WeightTable weights_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::map<SocketId, std::unique_ptr<StreamSocket>> sockets_;
  SocketId next_socket_ = 1;
};

}  // namespace bsim
