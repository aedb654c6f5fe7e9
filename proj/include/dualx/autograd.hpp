#pragma once

#include <functional>
#include <vector>

#include "dualx/tensor.hpp"

namespace dualx {

// Wengert list: ops append their backward rule while the forward value is
// computed, so the list is already topologically ordered and replaying it in
// reverse accumulates d(loss)/d(leaf) into every tracked leaf exactly once.
// A tape is single-owner; recording and backward are single-threaded.
template <class T>
class TapeT {
 public:
  void record(std::function<void()> back) { nodes_.push_back(std::move(back)); }

  std::size_t size() const { return nodes_.size(); }

  void backward(TensorT<T>& loss) {
    if (loss.numel() != 1)
      throw ShapeError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
    if (!loss.requires_grad())
      throw ConfigError("backward: loss is not connected to this tape");
    if (replayed_) throw ConfigError("backward: tape already replayed");
    replayed_ = true;
    loss.grad_mut()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  void clear() {
    nodes_.clear();
    replayed_ = false;
  }

 private:
  std::vector<std::function<void()>> nodes_;
  bool replayed_ = false;
};

using Tape = TapeT<float>;

template <class T>
void backward(TapeT<T>& tape, TensorT<T>& loss) {
  tape.backward(loss);
}

}  // namespace dualx
