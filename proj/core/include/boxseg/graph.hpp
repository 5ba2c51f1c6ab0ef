#pragma once

#include <functional>
#include <string>
#include <vector>

#include "boxseg/tensor.hpp"

namespace boxseg {

/// Reverse-mode tape. Operations append one record each during the forward
/// pass; backward() replays the records in reverse, so every node is visited
/// exactly once and gradient accumulation order is fixed by forward
/// execution order.
///
/// A Graph must stay on the thread that recorded it for the duration of a
/// forward/backward pair. Tensors are safe to share across graphs.
class Graph {
 public:
  Graph() = default;

  /// A non-recording graph for inference paths. Ops run normally but leave
  /// no tape behind.
  static Graph inference() {
    Graph g;
    g.recording_ = false;
    return g;
  }

  bool recording() const { return recording_; }

  /// Appends one op record. `op` must be a string literal (stored by
  /// pointer); `fn` accumulates into the parents' grad buffers.
  void record(const char* op, std::function<void()> fn) {
    nodes_.push_back(Node{op, std::move(fn)});
  }

  std::size_t node_count() const { return nodes_.size(); }

  std::vector<std::string> op_kinds() const {
    std::vector<std::string> kinds;
    kinds.reserve(nodes_.size());
    for (const Node& n : nodes_) kinds.emplace_back(n.op);
    return kinds;
  }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded node in reverse
  /// order. `loss` must be a single-element tensor. May be called once per
  /// recorded tape.
  void backward(Tensor loss);

  void clear() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  struct Node {
    const char* op;
    std::function<void()> fn;
  };

  std::vector<Node> nodes_;
  bool recording_ = true;
  bool backward_done_ = false;
};

}  // namespace boxseg
