#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "boxseg/common.hpp"

namespace boxseg {

/// Dimensions of a dense tensor, outermost first. All entries are positive.
using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);

/// Dense rank-N array of 32-bit floats in row-major order, with an optional
/// same-shape gradient buffer. Copying a Tensor copies the handle, not the
/// storage; two copies alias the same data and gradient.
///
/// Scalar results of reductions additionally carry a 64-bit value
/// (item_f64) accumulated before the final rounding to f32, so loss values
/// are insensitive to summation order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<float> values,
                            bool requires_grad = false);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int axis) const;
  std::size_t size() const;

  std::span<float> data();
  std::span<const float> data() const;

  /// Value of a single-element tensor.
  float item() const;
  /// 64-bit value for scalars produced by reductions; falls back to item().
  double item_f64() const;
  void set_precise(double value);

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<float> grad();
  std::span<const float> grad() const;
  void zero_grad();
  /// Drops the gradient buffer entirely.
  void clear_grad();

  /// Deep copy of shape and data (gradient not copied).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const {
    return impl_ == other.impl_;
  }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;

  Impl& impl();
  const Impl& impl() const;
};

}  // namespace boxseg
