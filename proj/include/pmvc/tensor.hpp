#pragma once

#include <memory>
#include <string>
#include <vector>

namespace pmvc {

// Dense float tensor with shared storage (copies alias; use clone() for a deep
// copy, and only mutate tensors you have just created). Feature maps are laid
// out (height, width, channels); conv weights (kh, kw, cin, cout); transposed
// conv weights (kh, kw, cout, cin); vectors rank 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  static Tensor full(std::vector<int> shape, float v);
  static Tensor from(std::vector<int> shape, std::vector<float> values);

  bool defined() const { return store_ != nullptr; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return store_ ? store_->size() : 0; }

  float* data() { return store_->data(); }
  const float* data() const { return store_->data(); }

  // Rank-3 accessors (h, w, c).
  float& at(int h, int w, int c) {
    return (*store_)[(static_cast<std::size_t>(h) * shape_[1] + w) * shape_[2] + c];
  }
  float at(int h, int w, int c) const {
    return (*store_)[(static_cast<std::size_t>(h) * shape_[1] + w) * shape_[2] + c];
  }

  Tensor clone() const;
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;  // e.g. "192x256x3"
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<float>> store_;
};

}  // namespace pmvc
