#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "invit/errors.hpp"
#include "invit/tensor.hpp"

namespace invit {

/// Adaptive moment estimation with decoupled weight decay.
template <typename T>
struct OptimizerStateT {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  void init(const std::vector<TensorT<T>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.size(), T(0));
      v.emplace_back(p.size(), T(0));
    }
    step = 0;
  }
};

template <typename T>
double global_grad_norm(const std::vector<TensorT<T>>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(sq);
}

/// Scales all gradients so the global norm is at most max_norm; returns the
/// pre-clip norm.
template <typename T>
double clip_global_norm(std::vector<TensorT<T>>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& p : params)
      for (T& g : p.grad_mut()) g *= s;
  }
  return norm;
}

template <typename T>
void optimizer_step(std::vector<TensorT<T>>& params, OptimizerStateT<T>& state) {
  if (state.m.size() != params.size()) throw LogicError("optimizer state not initialised");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi].data();
    const auto& grad = params[pi].grad();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    if (m.size() != data.size()) throw LogicError("optimizer moment shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      if (!std::isfinite(g)) throw NumericError("training divergence: non-finite gradient");
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      const double p = static_cast<double>(data[i]);
      data[i] = static_cast<T>(p - state.lr * mhat / (std::sqrt(vhat) + state.eps) -
                               state.lr * state.weight_decay * p);
    }
  }
}

}  // namespace invit
