#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "avsync/tensor.hpp"

namespace avsync {

// Reverse-mode differentiation tape. Ops append nodes in execution order, so
// the node list is topologically ordered by construction; backward() walks it
// in exact reverse. A tape belongs to one logical training context and is not
// shared across threads.
template <typename T>
class Tape {
 public:
  struct Node {
    const char* op;
    std::vector<Ten<T>> inputs;
    Ten<T> output;
    std::function<void()> backward;
  };

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  void record(const char* op, std::vector<Ten<T>> inputs, Ten<T> output,
              std::function<void()> backward) {
    if (!recording_) return;
    bool needs = false;
    for (const auto& in : inputs)
      if (in && in->requires_grad) needs = true;
    if (!needs) return;
    output->requires_grad = true;
    nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward)});
  }

  // Seeds d(loss)/d(loss) = 1 and runs every node's backward in reverse
  // order. Rejects non-scalar losses and a second backward on the same tape
  // (gradients accumulate; callers zero_grad explicitly between steps).
  void backward(const Ten<T>& loss) {
    check(loss != nullptr, "backward: null loss");
    check(loss->numel() == 1,
          cat("backward: loss must be scalar, got shape ", shape_str(loss->shape)));
    check(!backward_done_, "backward: tape already backpropagated; build a new tape");
    bool produced_here = false;
    for (const auto& n : nodes_)
      if (n.output == loss) produced_here = true;
    check(produced_here, "backward: loss was not produced on this tape");
    backward_done_ = true;
    loss->ensure_grad();
    loss->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output->has_grad() && it->backward) it->backward();
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  std::vector<Node> nodes_;
  bool recording_ = true;
  bool backward_done_ = false;
};

}  // namespace avsync
