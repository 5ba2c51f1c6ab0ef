#pragma once

#include <map>
#include <string>
#include <vector>

#include "boxseg/rng.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg {

// Named model parameters. Iteration order is always name-sorted, which keeps
// optimizer updates and checkpoint layout deterministic.
class ParamStore {
 public:
  Tensor create(const std::string& name, const Shape& shape);
  void add(const std::string& name, Tensor t);
  void add_trainable(const std::string& name, Tensor t);
  Tensor at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t count() const { return params_.size(); }
  std::vector<std::string> names() const;

  // Toggles requires_grad on every parameter whose name starts with prefix.
  // Returns how many parameters matched.
  int set_trainable_prefix(const std::string& prefix, bool trainable);
  void set_all_trainable(bool trainable);

  void zero_grads();

  const std::map<std::string, Tensor>& tensors() const { return params_; }

 private:
  std::map<std::string, Tensor> params_;
};

// SGD with classical momentum: v <- m*v + g, w <- w - lr*v.
// Velocity buffers are keyed by parameter name and start at zero.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  // Updates every trainable parameter and clears its gradient. Trainable
  // parameters without a gradient are an error (backward was not run).
  void step(ParamStore& params, double lr);

  double momentum() const { return momentum_; }

 private:
  double momentum_;
  std::map<std::string, std::vector<float>> velocity_;
};

// Glorot/Xavier uniform draw on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Rng& rng, const Shape& shape, int fan_in, int fan_out);

// Convolution kernel [c_out, c_in, k, k].
Tensor init_conv_kernel(Rng& rng, int c_out, int c_in, int k);
// Transposed-convolution kernel [c_in, c_out, k, k].
Tensor init_tconv_kernel(Rng& rng, int c_in, int c_out, int k);

}  // namespace boxseg
