#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "boxseg/graph.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg::testing {

inline Tensor rand_tensor(Rng& rng, const Shape& shape, double lo = -1.0,
                          double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Random values bounded away from zero, for ops with a kink at the origin.
inline Tensor rand_tensor_off_zero(Rng& rng, const Shape& shape,
                                   double margin = 0.2, double mag = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (float& v : t.data()) {
    const double u = rng.uniform(margin, mag);
    v = static_cast<float>(rng.coin() ? u : -u);
  }
  return t;
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

// Central-difference gradient check. make_loss must rebuild the forward pass
// from the current contents of the named tensors and return a scalar loss.
template <typename MakeLoss>
void expect_grads_match(MakeLoss make_loss,
                        std::vector<std::pair<std::string, Tensor>> wrt,
                        double eps = 1e-3, double tol = 1e-3,
                        int max_checks_per_tensor = 256) {
  for (auto& [name, t] : wrt) t.set_requires_grad(true);
  std::map<std::string, std::vector<float>> analytic;
  {
    Graph g;
    Tensor loss = make_loss(g);
    ASSERT_EQ(loss.size(), 1u) << "loss must be scalar";
    g.backward(loss);
    for (auto& [name, t] : wrt)
      analytic[name].assign(t.grad().begin(), t.grad().end());
  }
  for (auto& [name, t] : wrt) {
    std::span<float> data = t.data();
    const std::size_t n = data.size();
    const std::size_t stride =
        std::max<std::size_t>(1, n / static_cast<std::size_t>(max_checks_per_tensor));
    for (std::size_t i = 0; i < n; i += stride) {
      const float orig = data[i];
      data[i] = orig + static_cast<float>(eps);
      const double xp = static_cast<double>(data[i]);
      Graph gp = Graph::inference();
      const double lp = make_loss(gp).item_f64();
      data[i] = orig - static_cast<float>(eps);
      const double xm = static_cast<double>(data[i]);
      Graph gm = Graph::inference();
      const double lm = make_loss(gm).item_f64();
      data[i] = orig;
      const double fd = (lp - lm) / (xp - xm);
      const double a = static_cast<double>(analytic[name][i]);
      const double denom = std::max({std::abs(fd), std::abs(a), 1.0});
      EXPECT_LE(std::abs(fd - a) / denom, tol)
          << name << "[" << i << "]: analytic=" << a << " fd=" << fd;
    }
    t.clear_grad();
  }
}

}  // namespace boxseg::testing
