#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "pmvc/tensor.hpp"

namespace pmvc {

struct Parameter;

// A tensor plus (optionally) its node id on a Tape. id < 0 means the value is
// constant for differentiation purposes, or the tape is not recording.
struct TValue {
  Tensor t;
  int id = -1;
};

// Eager reverse-mode tape. Ops append nodes as they execute; backward() walks
// them in reverse (append order is already topological). With recording off,
// ops run pure and intermediates free as soon as callers drop them.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  bool recording() const { return recording_; }

  TValue leaf(Tensor t, bool requires_grad = false);
  // Binds a trainable parameter; repeated calls for the same parameter return
  // the same node so tied weights accumulate one gradient.
  TValue param(Parameter& p);
  TValue emit(Tensor out, bool requires_grad,
              std::function<void(Tape&, const Tensor&)> backward);

  bool needs(int id) const {
    return id >= 0 && nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  bool needs(const TValue& v) const { return needs(v.id); }

  // Adds g into the node's gradient (no-op for constants / non-required nodes).
  void accum(int id, const Tensor& g);

  // Seeds from a scalar loss, runs the reverse sweep, then adds parameter-node
  // gradients into Parameter::grad. Throws on non-finite gradients.
  void backward(const TValue& scalar_loss);

  const Tensor* grad_of(int id) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor grad;  // undefined until first accum
    std::function<void(Tape&, const Tensor&)> backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool recording_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

}  // namespace pmvc
