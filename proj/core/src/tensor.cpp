#include "boxseg/tensor.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace boxseg {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d > 0, "tensor shape has non-positive dimension: ", shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

struct Tensor::Impl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty means absent
  bool requires_grad = false;
  double precise = std::numeric_limits<double>::quiet_NaN();
};

Tensor::Impl& Tensor::impl() {
  require(impl_ != nullptr, "use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
  require(impl_ != nullptr, "use of undefined tensor");
  return *impl_;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  const std::size_t n = shape_numel(shape);
  t.impl_->shape = std::move(shape);
  t.impl_->data.assign(n, value);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<float> values,
                           bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  require(values.size() == n, "tensor data length ", values.size(),
          " does not match shape ", shape_str(shape));
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(values);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(float value) { return full({1}, value); }

const Shape& Tensor::shape() const { return impl().shape; }

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  require(axis >= 0 && axis < static_cast<int>(s.size()), "axis ", axis,
          " out of range for shape ", shape_str(s));
  return s[axis];
}

std::size_t Tensor::size() const { return impl().data.size(); }

std::span<float> Tensor::data() { return impl().data; }
std::span<const float> Tensor::data() const { return impl().data; }

float Tensor::item() const {
  require(size() == 1, "item() requires a single-element tensor, got shape ",
          shape_str(shape()));
  return impl().data[0];
}

double Tensor::item_f64() const {
  const Impl& i = impl();
  require(i.data.size() == 1, "item_f64() requires a single-element tensor");
  if (!std::isnan(i.precise)) return i.precise;
  return static_cast<double>(i.data[0]);
}

void Tensor::set_precise(double value) { impl().precise = value; }

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool value) { impl().requires_grad = value; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<float> Tensor::grad() {
  Impl& i = impl();
  if (i.grad.empty()) i.grad.assign(i.data.size(), 0.0f);
  return i.grad;
}

std::span<const float> Tensor::grad() const {
  const Impl& i = impl();
  require(!i.grad.empty(), "tensor has no gradient buffer");
  return i.grad;
}

void Tensor::zero_grad() {
  Impl& i = impl();
  if (!i.grad.empty()) i.grad.assign(i.data.size(), 0.0f);
}

void Tensor::clear_grad() { impl().grad.clear(); }

Tensor Tensor::clone() const {
  const Impl& i = impl();
  Tensor t = Tensor::from_vector(i.shape, i.data, i.requires_grad);
  t.impl_->precise = i.precise;
  return t;
}

}  // namespace boxseg
