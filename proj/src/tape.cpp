#include "pmvc/tape.hpp"

#include "pmvc/error.hpp"
#include "pmvc/kernels.hpp"
#include "pmvc/model.hpp"

namespace pmvc {

TValue Tape::leaf(Tensor t, bool requires_grad) {
  if (!recording_) return {std::move(t), -1};
  Node n;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {std::move(t), static_cast<int>(nodes_.size()) - 1};
}

TValue Tape::param(Parameter& p) {
  if (!recording_) return {p.value, -1};
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return {p.value, it->second};
  Node n;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return {p.value, id};
}

TValue Tape::emit(Tensor out, bool requires_grad,
                  std::function<void(Tape&, const Tensor&)> backward) {
  if (!recording_) return {std::move(out), -1};
  Node n;
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {std::move(out), static_cast<int>(nodes_.size()) - 1};
}

void Tape::accum(int id, const Tensor& g) {
  if (id < 0) return;
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (!n.grad.defined()) {
    n.grad = g.clone();
    return;
  }
  require(n.grad.size() == g.size(), ErrorKind::kContract,
          "gradient shape mismatch during accumulation");
  kern::active().vadd(n.grad.data(), g.data(), n.grad.data(), g.size());
}

void Tape::backward(const TValue& scalar_loss) {
  require(recording_, ErrorKind::kContract, "backward on a non-recording tape");
  require(scalar_loss.id >= 0 && scalar_loss.t.size() == 1, ErrorKind::kContract,
          "backward requires a recorded scalar loss");
  accum(scalar_loss.id, Tensor::full({1}, 1.0f));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad.defined() || !n.backward) continue;
    n.backward(*this, n.grad);
  }
  for (auto& [p, id] : param_nodes_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad.defined()) continue;
    require(n.grad.all_finite(), ErrorKind::kContract,
            "non-finite gradient for parameter " + p->name);
    if (!p->grad.defined()) p->grad = Tensor(p->value.shape());
    kern::active().vadd(p->grad.data(), n.grad.data(), p->grad.data(),
                        n.grad.size());
  }
}

const Tensor* Tape::grad_of(int id) const {
  if (id < 0) return nullptr;
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.grad.defined() ? &n.grad : nullptr;
}

}  // namespace pmvc
