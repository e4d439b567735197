#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmvc/rng.hpp"
#include "pmvc/tensor.hpp"

namespace pmvc {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;      // undefined until first backward
  Tensor m, v;      // Adam moments, allocated lazily
  std::int64_t step = 0;
  bool trainable = true;
};

// Named parameter store. Iteration order is registration order, which fixes
// the checkpoint layout and the content hash. Non-trainable entries (batch
// norm running statistics) are recognized by name suffix so the on-disk format
// needs no extra flags.
class ModelState {
 public:
  Parameter& add(const std::string& name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t count() const { return order_.size(); }
  const std::vector<std::unique_ptr<Parameter>>& entries() const { return order_; }

  void zero_grads();
  std::uint64_t content_hash() const;  // over names, shapes, values

  void save(const std::string& path, bool with_moments) const;
  static ModelState load(const std::string& path);

  static bool name_is_trainable(const std::string& name);

 private:
  std::vector<std::unique_ptr<Parameter>> order_;
  std::unordered_map<std::string, Parameter*> index_;
};

// value -= lr * mhat / (sqrt(vhat) + eps), with bias-corrected moments and a
// per-parameter step counter. Parameters without a gradient are skipped.
void adam_step(ModelState& model, float lr, float beta1 = 0.9f,
               float beta2 = 0.999f, float eps = 1e-8f);

// Normal(0, sqrt(2 / fan_in)) draws.
Tensor kaiming_init(std::vector<int> shape, int fan_in, Rng& rng);

}  // namespace pmvc
