#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "invit/errors.hpp"

namespace invit {

/// Thread-local switch disabling graph recording (inference-mode forwards).
struct GradMode {
  static bool& enabled() {
    thread_local bool on = true;
    return on;
  }
};

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
  ~NoGradGuard() { GradMode::enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Dense row-major 2D tensor with reverse-mode autodiff. Scalars are 1x1.
/// Ops allocate fresh outputs (no in-place mutation of recorded values);
/// a backward closure is attached only when some input requires gradients,
/// so inference-mode forwards (e.g. baseline rollouts) build no graph.
template <typename T>
class TensorT {
  struct Impl {
    int rows = 0, cols = 0;
    std::vector<T> data;
    std::vector<T> grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<Impl>> parents;
    std::function<void(Impl&)> backward_fn;

    std::vector<T>& grad_ref() {
      if (grad.empty()) grad.assign(data.size(), T(0));
      return grad;
    }
  };

 public:
  TensorT() = default;

  TensorT(int rows, int cols, T fill = T(0), bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    if (rows < 1 || cols < 1) throw LogicError("tensor dims must be positive");
    impl_->rows = rows;
    impl_->cols = cols;
    impl_->data.assign(static_cast<size_t>(rows) * cols, fill);
    impl_->requires_grad = requires_grad;
  }

  static TensorT from(std::vector<T> values, int rows, int cols, bool requires_grad = false) {
    if (values.size() != static_cast<size_t>(rows) * cols)
      throw LogicError("tensor data length does not match shape");
    TensorT t(rows, cols, T(0), requires_grad);
    t.impl_->data = std::move(values);
    return t;
  }

  static TensorT scalar(T v) { return from({v}, 1, 1); }

  bool defined() const { return impl_ != nullptr; }
  int rows() const { return impl_->rows; }
  int cols() const { return impl_->cols; }
  size_t size() const { return impl_->data.size(); }
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  std::vector<T>& data() { return impl_->data; }
  const std::vector<T>& data() const { return impl_->data; }
  T at(int r, int c) const { return impl_->data[static_cast<size_t>(r) * cols() + c]; }
  T& at(int r, int c) { return impl_->data[static_cast<size_t>(r) * cols() + c]; }

  T item() const {
    if (size() != 1) throw LogicError("item() requires a 1x1 tensor");
    return impl_->data[0];
  }

  const std::vector<T>& grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
  }
  std::vector<T>& grad_mut() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.assign(impl_->data.size(), T(0)); }

  /// Reverse-mode sweep from this scalar. Gradients accumulate into every
  /// requires_grad tensor reachable through the recorded graph.
  void backward(T seed = T(1)) const {
    if (size() != 1) throw LogicError("backward requires a scalar loss");
    std::vector<Impl*> order;
    topo_sort(impl_.get(), order);
    impl_->grad_ref()[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Impl* node = *it;
      if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
    // Drop interior closures/grads so repeated backward calls cannot
    // double-accumulate; parameter grads (leaves) are untouched.
    for (Impl* node : order) {
      if (node->backward_fn) {
        node->backward_fn = nullptr;
        node->parents.clear();
        node->grad.clear();
      }
    }
  }

  // ---- op construction helpers (used by the free functions below) ----

  static TensorT make_op(int rows, int cols, std::vector<std::shared_ptr<Impl>> parents,
                         std::function<void(Impl&)> backward_fn, bool check_finite = true) {
    TensorT out(rows, cols);
    bool needs = false;
    if (GradMode::enabled())
      for (const auto& p : parents)
        if (p->requires_grad) needs = true;
    if (needs) {
      out.impl_->requires_grad = true;
      out.impl_->parents = std::move(parents);
      out.impl_->backward_fn = std::move(backward_fn);
    }
    (void)check_finite;
    return out;
  }

  std::shared_ptr<Impl> impl() const { return impl_; }

#ifndef NDEBUG
  void debug_check_finite(const char* op) const {
    for (T v : impl_->data)
      if (!std::isfinite(static_cast<double>(v)))
        throw NumericError(std::string("non-finite value out of op ") + op);
  }
#else
  void debug_check_finite(const char*) const {}
#endif

 private:
  static void topo_sort(Impl* root, std::vector<Impl*>& order) {
    // Iterative post-order DFS; deterministic because traversal follows the
    // stored parent order.
    std::unordered_set<Impl*> visited;
    std::vector<std::pair<Impl*, size_t>> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Impl* p = node->parents[next++].get();
        if (p->backward_fn || p->requires_grad) {
          if (visited.insert(p).second && p->backward_fn) stack.push_back({p, 0});
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Impl> impl_;
};

using Tensor = TensorT<float>;

namespace detail {

template <typename T>
void shape_error(const char* op, const TensorT<T>& a, const TensorT<T>& b) {
  throw LogicError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                   std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                   std::to_string(b.cols()) + ")");
}

}  // namespace detail

/// C = A (r x k) * B (k x c)
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.cols() != b.rows()) detail::shape_error("matmul", a, b);
  const int r = a.rows(), k = a.cols(), c = b.cols();
  auto out = TensorT<T>::make_op(
      r, c, {a.impl(), b.impl()},
      [a, b, r, k, c](auto& node) {
        const T* g = node.grad.data();
        if (a.impl()->requires_grad || a.impl()->backward_fn) {
          T* da = a.impl()->grad_ref().data();
          const T* bd = b.data().data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
              const T gij = g[i * c + j];
              for (int x = 0; x < k; ++x) da[i * k + x] += gij * bd[x * c + j];
            }
        }
        if (b.impl()->requires_grad || b.impl()->backward_fn) {
          T* db = b.impl()->grad_ref().data();
          const T* ad = a.data().data();
          for (int i = 0; i < r; ++i)
            for (int x = 0; x < k; ++x) {
              const T aix = ad[i * k + x];
              for (int j = 0; j < c; ++j) db[x * c + j] += aix * g[i * c + j];
            }
        }
      });
  T* o = out.data().data();
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  for (int i = 0; i < r; ++i)
    for (int x = 0; x < k; ++x) {
      const T aix = ad[i * k + x];
      if (aix == T(0)) continue;
      const T* brow = bd + static_cast<size_t>(x) * c;
      T* orow = o + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) orow[j] += aix * brow[j];
    }
  out.debug_check_finite("matmul");
  return out;
}

/// C = A (r x k) * B^T where B is (c x k); row-major friendly.
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.cols() != b.cols()) detail::shape_error("matmul_nt", a, b);
  const int r = a.rows(), k = a.cols(), c = b.rows();
  auto out = TensorT<T>::make_op(
      r, c, {a.impl(), b.impl()},
      [a, b, r, k, c](auto& node) {
        const T* g = node.grad.data();
        if (a.impl()->requires_grad || a.impl()->backward_fn) {
          T* da = a.impl()->grad_ref().data();
          const T* bd = b.data().data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
              const T gij = g[i * c + j];
              for (int x = 0; x < k; ++x) da[i * k + x] += gij * bd[j * k + x];
            }
        }
        if (b.impl()->requires_grad || b.impl()->backward_fn) {
          T* db = b.impl()->grad_ref().data();
          const T* ad = a.data().data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
              const T gij = g[i * c + j];
              for (int x = 0; x < k; ++x) db[j * k + x] += gij * ad[i * k + x];
            }
        }
      });
  T* o = out.data().data();
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      const T* arow = ad + static_cast<size_t>(i) * k;
      const T* brow = bd + static_cast<size_t>(j) * k;
      T acc = T(0);
      for (int x = 0; x < k; ++x) acc += arow[x] * brow[x];
      o[i * c + j] = acc;
    }
  out.debug_check_finite("matmul_nt");
  return out;
}

/// Elementwise add; b may also be a 1 x cols row broadcast across a's rows.
template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1;
  if (b.cols() != a.cols() || (!broadcast && b.rows() != a.rows()))
    detail::shape_error("add", a, b);
  const int r = a.rows(), c = a.cols();
  auto out = TensorT<T>::make_op(
      r, c, {a.impl(), b.impl()},
      [a, b, r, c, broadcast](auto& node) {
        const T* g = node.grad.data();
        if (a.impl()->requires_grad || a.impl()->backward_fn) {
          T* da = a.impl()->grad_ref().data();
          for (size_t i = 0; i < node.grad.size(); ++i) da[i] += g[i];
        }
        if (b.impl()->requires_grad || b.impl()->backward_fn) {
          T* db = b.impl()->grad_ref().data();
          if (broadcast) {
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < c; ++j) db[j] += g[i * c + j];
          } else {
            for (size_t i = 0; i < node.grad.size(); ++i) db[i] += g[i];
          }
        }
      });
  T* o = out.data().data();
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  if (broadcast) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) o[i * c + j] = ad[i * c + j] + bd[j];
  } else {
    for (size_t i = 0; i < out.size(); ++i) o[i] = ad[i] + bd[i];
  }
  out.debug_check_finite("add");
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, double s) {
  auto out = TensorT<T>::make_op(a.rows(), a.cols(), {a.impl()}, [a, s](auto& node) {
    if (a.impl()->requires_grad || a.impl()->backward_fn) {
      T* da = a.impl()->grad_ref().data();
      const T* g = node.grad.data();
      for (size_t i = 0; i < node.grad.size(); ++i) da[i] += static_cast<T>(s) * g[i];
    }
  });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = static_cast<T>(s) * ad[i];
  out.debug_check_finite("scale");
  return out;
}

/// Channel-wise concatenation: same row count, columns appended in order.
template <typename T>
TensorT<T> concat_cols(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw LogicError("concat_cols: no inputs");
  const int r = parts[0].rows();
  int c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) detail::shape_error("concat_cols", parts[0], p);
    c += p.cols();
  }
  std::vector<decltype(parts[0].impl())> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  auto out = TensorT<T>::make_op(
      r, c, {impls.begin(), impls.end()},
      [parts, r, c](auto& node) {
        const T* g = node.grad.data();
        int off = 0;
        for (const auto& p : parts) {
          const int pc = p.cols();
          if (p.impl()->requires_grad || p.impl()->backward_fn) {
            T* dp = p.impl()->grad_ref().data();
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < pc; ++j) dp[i * pc + j] += g[i * c + off + j];
          }
          off += pc;
        }
      });
  T* o = out.data().data();
  int off = 0;
  for (const auto& p : parts) {
    const int pc = p.cols();
    const T* pd = p.data().data();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < pc; ++j) o[i * c + off + j] = pd[i * pc + j];
    off += pc;
  }
  out.debug_check_finite("concat_cols");
  return out;
}

/// Row-wise concatenation: same column count, rows appended in order.
template <typename T>
TensorT<T> concat_rows(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw LogicError("concat_rows: no inputs");
  const int c = parts[0].cols();
  int r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) detail::shape_error("concat_rows", parts[0], p);
    r += p.rows();
  }
  std::vector<decltype(parts[0].impl())> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  auto out = TensorT<T>::make_op(
      r, c, {impls.begin(), impls.end()},
      [parts, c](auto& node) {
        const T* g = node.grad.data();
        size_t off = 0;
        for (const auto& p : parts) {
          const size_t sz = p.size();
          if (p.impl()->requires_grad || p.impl()->backward_fn) {
            T* dp = p.impl()->grad_ref().data();
            for (size_t i = 0; i < sz; ++i) dp[i] += g[off + i];
          }
          off += sz;
        }
      });
  T* o = out.data().data();
  size_t off = 0;
  for (const auto& p : parts) {
    const T* pd = p.data().data();
    std::copy(pd, pd + p.size(), o + off);
    off += p.size();
  }
  out.debug_check_finite("concat_rows");
  return out;
}

/// Row-wise softmax (last axis), numerically stabilised; -inf inputs get
/// exactly zero mass.
template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& a) {
  const int r = a.rows(), c = a.cols();
  auto out_holder = std::make_shared<std::vector<T>>();
  auto out = TensorT<T>::make_op(
      r, c, {a.impl()},
      [a, out_holder, r, c](auto& node) {
        if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
        const T* g = node.grad.data();
        const T* y = out_holder->data();
        T* da = a.impl()->grad_ref().data();
        for (int i = 0; i < r; ++i) {
          T dot = T(0);
          for (int j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
          for (int j = 0; j < c; ++j) da[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
        }
      });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (int i = 0; i < r; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < c; ++j) mx = std::max(mx, ad[i * c + j]);
    if (!(mx > -std::numeric_limits<T>::infinity()))
      throw NumericError("softmax_rows: entire row is masked");
    T sum = T(0);
    for (int j = 0; j < c; ++j) {
      const T v = ad[i * c + j];
      const T e = (v == -std::numeric_limits<T>::infinity()) ? T(0) : std::exp(v - mx);
      o[i * c + j] = e;
      sum += e;
    }
    for (int j = 0; j < c; ++j) o[i * c + j] /= sum;
  }
  *out_holder = out.data();
  out.debug_check_finite("softmax_rows");
  return out;
}

template <typename T>
TensorT<T> log_elem(const TensorT<T>& a) {
  auto out = TensorT<T>::make_op(a.rows(), a.cols(), {a.impl()}, [a](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    T* da = a.impl()->grad_ref().data();
    const T* g = node.grad.data();
    const T* ad = a.data().data();
    for (size_t i = 0; i < node.grad.size(); ++i) da[i] += g[i] / ad[i];
  });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = std::log(ad[i]);
  return out;
}

template <typename T>
TensorT<T> tanh_elem(const TensorT<T>& a) {
  auto out_holder = std::make_shared<std::vector<T>>();
  auto out = TensorT<T>::make_op(a.rows(), a.cols(), {a.impl()}, [a, out_holder](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    T* da = a.impl()->grad_ref().data();
    const T* g = node.grad.data();
    const T* y = out_holder->data();
    for (size_t i = 0; i < node.grad.size(); ++i) da[i] += g[i] * (T(1) - y[i] * y[i]);
  });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = std::tanh(ad[i]);
  *out_holder = out.data();
  out.debug_check_finite("tanh");
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  auto out = TensorT<T>::make_op(a.rows(), a.cols(), {a.impl()}, [a](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    T* da = a.impl()->grad_ref().data();
    const T* g = node.grad.data();
    const T* ad = a.data().data();
    for (size_t i = 0; i < node.grad.size(); ++i)
      if (ad[i] > T(0)) da[i] += g[i];
  });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = ad[i] > T(0) ? ad[i] : T(0);
  out.debug_check_finite("relu");
  return out;
}

/// Gaussian error linear unit, exact erf form: x * Phi(x). Smooth everywhere,
/// so finite-difference gradient checks stay clean through deep stacks.
template <typename T>
TensorT<T> gelu(const TensorT<T>& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  auto out = TensorT<T>::make_op(a.rows(), a.cols(), {a.impl()}, [a](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    T* da = a.impl()->grad_ref().data();
    const T* g = node.grad.data();
    const T* ad = a.data().data();
    for (size_t i = 0; i < node.grad.size(); ++i) {
      const double x = static_cast<double>(ad[i]);
      const double phi_cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      da[i] += g[i] * static_cast<T>(phi_cdf + x * phi_pdf);
    }
  });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = static_cast<double>(ad[i]);
    o[i] = static_cast<T>(x * 0.5 * (1.0 + std::erf(x * kInvSqrt2)));
  }
  out.debug_check_finite("gelu");
  return out;
}

/// Replaces a[i,j] with `value` wherever mask[i,j] != 0; gradient flows only
/// through unmasked slots. `value` may be -infinity (softmax masking).
template <typename T>
TensorT<T> masked_fill(const TensorT<T>& a, const std::vector<uint8_t>& mask, T value) {
  if (mask.size() != a.size()) throw LogicError("masked_fill: mask size mismatch");
  auto mask_copy = std::make_shared<std::vector<uint8_t>>(mask);
  auto out = TensorT<T>::make_op(a.rows(), a.cols(), {a.impl()}, [a, mask_copy](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    T* da = a.impl()->grad_ref().data();
    const T* g = node.grad.data();
    for (size_t i = 0; i < node.grad.size(); ++i)
      if (!(*mask_copy)[i]) da[i] += g[i];
  });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = mask[i] ? value : ad[i];
  return out;
}

/// Gathers rows of a by index (duplicates allowed); adjoint scatter-adds.
template <typename T>
TensorT<T> gather_rows(const TensorT<T>& a, const std::vector<int>& indices) {
  const int c = a.cols();
  for (int idx : indices)
    if (idx < 0 || idx >= a.rows()) throw LogicError("gather_rows: index out of range");
  auto idx_copy = std::make_shared<std::vector<int>>(indices);
  auto out = TensorT<T>::make_op(
      static_cast<int>(indices.size()), c, {a.impl()}, [a, idx_copy, c](auto& node) {
        if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
        T* da = a.impl()->grad_ref().data();
        const T* g = node.grad.data();
        for (size_t i = 0; i < idx_copy->size(); ++i) {
          const int src = (*idx_copy)[i];
          for (int j = 0; j < c; ++j) da[src * c + j] += g[i * c + j];
        }
      });
  T* o = out.data().data();
  const T* ad = a.data().data();
  for (size_t i = 0; i < indices.size(); ++i)
    for (int j = 0; j < c; ++j) o[i * c + j] = ad[indices[i] * c + j];
  return out;
}

/// Per-row layer normalisation with learnable gain/bias (both 1 x cols).
template <typename T>
TensorT<T> layer_norm(const TensorT<T>& a, const TensorT<T>& gain, const TensorT<T>& bias,
                      double eps = 1e-5) {
  if (gain.rows() != 1 || gain.cols() != a.cols()) detail::shape_error("layer_norm", a, gain);
  if (bias.rows() != 1 || bias.cols() != a.cols()) detail::shape_error("layer_norm", a, bias);
  const int r = a.rows(), c = a.cols();
  auto xhat = std::make_shared<std::vector<T>>(a.size());
  auto inv_sd = std::make_shared<std::vector<T>>(static_cast<size_t>(r));
  auto out = TensorT<T>::make_op(
      r, c, {a.impl(), gain.impl(), bias.impl()},
      [a, gain, bias, xhat, inv_sd, r, c](auto& node) {
        const T* g = node.grad.data();
        const T* xh = xhat->data();
        const T* gd = gain.data().data();
        if (gain.impl()->requires_grad || gain.impl()->backward_fn) {
          T* dg = gain.impl()->grad_ref().data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) dg[j] += g[i * c + j] * xh[i * c + j];
        }
        if (bias.impl()->requires_grad || bias.impl()->backward_fn) {
          T* db = bias.impl()->grad_ref().data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) db[j] += g[i * c + j];
        }
        if (a.impl()->requires_grad || a.impl()->backward_fn) {
          T* da = a.impl()->grad_ref().data();
          for (int i = 0; i < r; ++i) {
            T mean_gy = T(0), mean_gyx = T(0);
            for (int j = 0; j < c; ++j) {
              const T gy = g[i * c + j] * gd[j];
              mean_gy += gy;
              mean_gyx += gy * xh[i * c + j];
            }
            mean_gy /= static_cast<T>(c);
            mean_gyx /= static_cast<T>(c);
            for (int j = 0; j < c; ++j) {
              const T gy = g[i * c + j] * gd[j];
              da[i * c + j] +=
                  (gy - mean_gy - xh[i * c + j] * mean_gyx) * (*inv_sd)[static_cast<size_t>(i)];
            }
          }
        }
      });
  T* o = out.data().data();
  const T* ad = a.data().data();
  const T* gd = gain.data().data();
  const T* bd = bias.data().data();
  for (int i = 0; i < r; ++i) {
    T mean = T(0);
    for (int j = 0; j < c; ++j) mean += ad[i * c + j];
    mean /= static_cast<T>(c);
    T var = T(0);
    for (int j = 0; j < c; ++j) {
      const T d = ad[i * c + j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(c);
    const T isd = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*inv_sd)[static_cast<size_t>(i)] = isd;
    for (int j = 0; j < c; ++j) {
      const T xh = (ad[i * c + j] - mean) * isd;
      (*xhat)[static_cast<size_t>(i) * c + j] = xh;
      o[i * c + j] = xh * gd[j] + bd[j];
    }
  }
  out.debug_check_finite("layer_norm");
  return out;
}

template <typename T>
TensorT<T> reduce_sum(const TensorT<T>& a) {
  auto out = TensorT<T>::make_op(1, 1, {a.impl()}, [a](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    T* da = a.impl()->grad_ref().data();
    const T g = node.grad[0];
    for (size_t i = 0; i < a.size(); ++i) da[i] += g;
  });
  T acc = T(0);
  for (T v : a.data()) acc += v;
  out.data()[0] = acc;
  return out;
}

template <typename T>
TensorT<T> reduce_mean(const TensorT<T>& a) {
  const T inv = T(1) / static_cast<T>(a.size());
  auto out = TensorT<T>::make_op(1, 1, {a.impl()}, [a, inv](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    T* da = a.impl()->grad_ref().data();
    const T g = node.grad[0] * inv;
    for (size_t i = 0; i < a.size(); ++i) da[i] += g;
  });
  T acc = T(0);
  for (T v : a.data()) acc += v;
  out.data()[0] = acc * inv;
  return out;
}

/// Selects element (r, c) as a 1x1 tensor.
template <typename T>
TensorT<T> pick(const TensorT<T>& a, int r, int c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols())
    throw LogicError("pick: index out of range");
  const int cols = a.cols();
  auto out = TensorT<T>::make_op(1, 1, {a.impl()}, [a, r, c, cols](auto& node) {
    if (!(a.impl()->requires_grad || a.impl()->backward_fn)) return;
    a.impl()->grad_ref()[static_cast<size_t>(r) * cols + c] += node.grad[0];
  });
  out.data()[0] = a.at(r, c);
  return out;
}

/// Fused scaled-dot-product multi-head attention. q: (m x d), k/v: (n x d),
/// d divisible by n_heads; per head softmax(q_h k_h^T / sqrt(d/h)) v_h, head
/// outputs concatenated back to (m x d). When `probs_out` is non-null the
/// per-head attention rows are written there as n_heads stacked (m x n)
/// blocks (used by the analysis module's attention capture).
template <typename T>
TensorT<T> multihead_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                               int n_heads, std::vector<T>* probs_out = nullptr) {
  const int m = q.rows(), n = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d) detail::shape_error("multihead_attention", q, k);
  if (v.rows() != n) detail::shape_error("multihead_attention", k, v);
  if (n_heads < 1 || d % n_heads != 0)
    throw LogicError("multihead_attention: d must be divisible by n_heads");
  const int dh = d / n_heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));

  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(n_heads) * m * n);
  auto out = TensorT<T>::make_op(
      m, d, {q.impl(), k.impl(), v.impl()},
      [q, k, v, probs, n_heads, m, n, d, dh, sc](auto& node) {
        const T* g = node.grad.data();
        const T* qd = q.data().data();
        const T* kd = k.data().data();
        const T* vd = v.data().data();
        const bool need_q = q.impl()->requires_grad || q.impl()->backward_fn;
        const bool need_k = k.impl()->requires_grad || k.impl()->backward_fn;
        const bool need_v = v.impl()->requires_grad || v.impl()->backward_fn;
        T* dq = need_q ? q.impl()->grad_ref().data() : nullptr;
        T* dk = need_k ? k.impl()->grad_ref().data() : nullptr;
        T* dv = need_v ? v.impl()->grad_ref().data() : nullptr;
        std::vector<T> ds(static_cast<size_t>(n));
        for (int h = 0; h < n_heads; ++h) {
          const int off = h * dh;
          const T* ph = probs->data() + static_cast<size_t>(h) * m * n;
          for (int i = 0; i < m; ++i) {
            const T* arow = ph + static_cast<size_t>(i) * n;
            const T* grow = g + static_cast<size_t>(i) * d + off;
            // dV_h += A^T dO_h ; dA = dO_h V_h^T
            T dot = T(0);
            for (int j = 0; j < n; ++j) {
              const T* vrow = vd + static_cast<size_t>(j) * d + off;
              T da = T(0);
              for (int x = 0; x < dh; ++x) da += grow[x] * vrow[x];
              ds[static_cast<size_t>(j)] = da;
              dot += da * arow[j];
              if (need_v) {
                T* dvrow = dv + static_cast<size_t>(j) * d + off;
                const T aij = arow[j];
                for (int x = 0; x < dh; ++x) dvrow[x] += aij * grow[x];
              }
            }
            // softmax backward, then scale; accumulate into dQ / dK
            for (int j = 0; j < n; ++j) {
              const T dsij = arow[j] * (ds[static_cast<size_t>(j)] - dot) * sc;
              if (dsij == T(0)) continue;
              if (need_q) {
                T* dqrow = dq + static_cast<size_t>(i) * d + off;
                const T* krow = kd + static_cast<size_t>(j) * d + off;
                for (int x = 0; x < dh; ++x) dqrow[x] += dsij * krow[x];
              }
              if (need_k) {
                T* dkrow = dk + static_cast<size_t>(j) * d + off;
                const T* qrow = qd + static_cast<size_t>(i) * d + off;
                for (int x = 0; x < dh; ++x) dkrow[x] += dsij * qrow[x];
              }
            }
          }
        }
      });

  T* o = out.data().data();
  const T* qd = q.data().data();
  const T* kd = k.data().data();
  const T* vd = v.data().data();
  std::vector<T> row(static_cast<size_t>(n));
  for (int h = 0; h < n_heads; ++h) {
    const int off = h * dh;
    T* ph = probs->data() + static_cast<size_t>(h) * m * n;
    for (int i = 0; i < m; ++i) {
      const T* qrow = qd + static_cast<size_t>(i) * d + off;
      T mx = -std::numeric_limits<T>::infinity();
      for (int j = 0; j < n; ++j) {
        const T* krow = kd + static_cast<size_t>(j) * d + off;
        T s = T(0);
        for (int x = 0; x < dh; ++x) s += qrow[x] * krow[x];
        row[static_cast<size_t>(j)] = s * sc;
        mx = std::max(mx, row[static_cast<size_t>(j)]);
      }
      T sum = T(0);
      for (int j = 0; j < n; ++j) {
        const T e = std::exp(row[static_cast<size_t>(j)] - mx);
        row[static_cast<size_t>(j)] = e;
        sum += e;
      }
      T* arow = ph + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) arow[j] = row[static_cast<size_t>(j)] / sum;
      T* orow = o + static_cast<size_t>(i) * d + off;
      for (int x = 0; x < dh; ++x) orow[x] = T(0);
      for (int j = 0; j < n; ++j) {
        const T aij = arow[j];
        const T* vrow = vd + static_cast<size_t>(j) * d + off;
        for (int x = 0; x < dh; ++x) orow[x] += aij * vrow[x];
      }
    }
  }
  if (probs_out) *probs_out = *probs;
  out.debug_check_finite("multihead_attention");
  return out;
}

/// Central-difference gradient check. fn must rebuild its graph from the
/// params' current data on every call and return a scalar. Returns
/// max over parameter elements of |analytic - numeric| / (|numeric| + 1e-8).
inline double gradcheck(const std::function<TensorT<double>()>& fn,
                        std::vector<TensorT<double>> params, double eps = 1e-4) {
  for (const auto& p : params)
    if (!p.requires_grad()) throw LogicError("gradcheck: all params must require grad");
  for (auto& p : params) p.zero_grad();
  TensorT<double> loss = fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi].data();
    for (size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      const double up = fn().item();
      data[i] = orig - eps;
      const double dn = fn().item();
      data[i] = orig;
      const double numeric = (up - dn) / (2.0 * eps);
      const double err = std::abs(analytic[pi][i] - numeric) / (std::abs(numeric) + 1e-8);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace invit
