#include "pmvc/tensor.hpp"

#include <cmath>

#include "pmvc/error.hpp"

namespace pmvc {

namespace {
std::size_t shape_elems(const std::vector<int>& shape) {
  require(!shape.empty(), ErrorKind::kDimension, "tensor rank must be >= 1");
  std::size_t n = 1;
  for (int d : shape) {
    require(d > 0, ErrorKind::kDimension, "tensor extents must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) {
  const std::size_t n = shape_elems(shape);
  shape_ = std::move(shape);
  store_ = std::make_shared<std::vector<float>>(n, 0.0f);
}

Tensor Tensor::full(std::vector<int> shape, float v) {
  Tensor t(std::move(shape));
  for (float& x : *t.store_) x = v;
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values) {
  const std::size_t n = shape_elems(shape);
  require(values.size() == n, ErrorKind::kDimension,
          "value count does not match tensor shape");
  Tensor t;
  t.shape_ = std::move(shape);
  t.store_ = std::make_shared<std::vector<float>>(std::move(values));
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.store_ = std::make_shared<std::vector<float>>(*store_);
  return t;
}

std::string Tensor::shape_str() const {
  std::string s;
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape_[i]);
  }
  return s;
}

bool Tensor::all_finite() const {
  for (float v : *store_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace pmvc
