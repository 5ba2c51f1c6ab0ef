#include "boxseg/param_store.hpp"

#include <cmath>

#include "boxseg/common.hpp"

namespace boxseg {

Tensor ParamStore::create(const std::string& name, const Shape& shape) {
  Tensor t = Tensor::zeros(shape);
  t.set_requires_grad(true);
  add(name, t);
  return t;
}

void ParamStore::add(const std::string& name, Tensor t) {
  require(t.defined(), "ParamStore::add: undefined tensor for '", name, "'");
  auto [it, inserted] = params_.emplace(name, std::move(t));
  require(inserted, "ParamStore::add: duplicate parameter '", name, "'");
}

void ParamStore::add_trainable(const std::string& name, Tensor t) {
  t.set_requires_grad(true);
  add(name, std::move(t));
}

Tensor ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  require(it != params_.end(), "ParamStore::at: unknown parameter '", name,
          "'");
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

int ParamStore::set_trainable_prefix(const std::string& prefix,
                                     bool trainable) {
  int matched = 0;
  for (auto& [name, t] : params_) {
    if (name.rfind(prefix, 0) == 0) {
      t.set_requires_grad(trainable);
      ++matched;
    }
  }
  return matched;
}

void ParamStore::set_all_trainable(bool trainable) {
  for (auto& [name, t] : params_) t.set_requires_grad(trainable);
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) t.clear_grad();
}

void SgdMomentum::step(ParamStore& params, double lr) {
  require(lr > 0.0, "SgdMomentum::step: lr must be positive, got ", lr);
  const float m = static_cast<float>(momentum_);
  const float lrf = static_cast<float>(lr);
  for (const auto& [name, handle] : params.tensors()) {
    Tensor t = handle;  // shared storage; safe to update through a copy
    if (!t.requires_grad()) continue;
    require(t.has_grad(), "SgdMomentum::step: parameter '", name,
            "' has no gradient; run backward before stepping");
    auto& v = velocity_[name];
    if (v.empty()) v.assign(t.size(), 0.0f);
    require(v.size() == t.size(), "SgdMomentum::step: parameter '", name,
            "' changed size");
    std::span<float> w = t.data();
    std::span<const float> grad = t.grad();
    bool finite = true;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = m * v[i] + grad[i];
      w[i] -= lrf * v[i];
      finite = finite && std::isfinite(w[i]);
    }
    require(finite, "SgdMomentum::step: parameter '", name,
            "' became non-finite");
    t.clear_grad();
  }
}

Tensor glorot_uniform(Rng& rng, const Shape& shape, int fan_in, int fan_out) {
  require(fan_in > 0 && fan_out > 0, "glorot_uniform: fans must be positive");
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros(shape);
  std::span<float> d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<float>(rng.uniform(-a, a));
  return t;
}

Tensor init_conv_kernel(Rng& rng, int c_out, int c_in, int k) {
  return glorot_uniform(rng, {c_out, c_in, k, k}, c_in * k * k, c_out * k * k);
}

Tensor init_tconv_kernel(Rng& rng, int c_in, int c_out, int k) {
  return glorot_uniform(rng, {c_in, c_out, k, k}, c_in * k * k, c_out * k * k);
}

}  // namespace boxseg
