#include "boxseg/graph.hpp"

namespace boxseg {

void Graph::backward(Tensor loss) {
  require(loss.defined() && loss.size() == 1,
          "backward() requires a scalar loss, got shape ",
          loss.defined() ? shape_str(loss.shape()) : "<undefined>");
  require(!backward_done_, "backward() already ran on this graph");
  backward_done_ = true;
  loss.grad()[0] += 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->fn();
  }
}

}  // namespace boxseg
