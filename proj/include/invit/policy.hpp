#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "invit/errors.hpp"
#include "invit/rng.hpp"
#include "invit/state.hpp"
#include "invit/tensor.hpp"

namespace invit {

struct ModelConfig {
  int n_views = 3;
  std::vector<int> k_list = {50, 35, 15};
  int d_model = 128;
  int d_ff = 512;
  int n_heads = 8;
  int encoder_layers_per_view = 2;
  int decoder_layers = 3;
  double c_clip = 10.0;
  bool global_view = false;   // largest view spans all feasible nodes
  bool invariance_off = false;  // feed raw coordinates, skip normalization

  void validate() const {
    if (n_views < 1) throw InputError("model config: n_views must be positive");
    if (static_cast<int>(k_list.size()) != n_views)
      throw InputError("model config: k_list length must equal n_views");
    for (size_t i = 1; i < k_list.size(); ++i)
      if (k_list[i] >= k_list[i - 1])
        throw InputError("model config: k_list must be strictly descending");
    if (k_list.back() < 1) throw InputError("model config: k values must be positive");
    if (d_model < 1 || d_ff < 1) throw InputError("model config: bad dimensions");
    if (n_heads < 1 || d_model % n_heads != 0)
      throw InputError("model config: d_model must be divisible by n_heads");
    if (encoder_layers_per_view < 1 || decoder_layers < 2)
      throw InputError("model config: need >= 1 encoder and >= 2 decoder layers");
    if (c_clip <= 0.0) throw InputError("model config: C must be positive");
  }
};

/// One pre-norm transformer block (attention + feed-forward). The key
/// projection carries no bias: a per-query constant shift of the logits
/// cancels in the softmax, so such a parameter could never learn.
template <typename T>
struct AttnBlockT {
  TensorT<T> ln1_g, ln1_b, wq, bq, wk, wv, bv, wo, bo;
  TensorT<T> ln2_g, ln2_b, w1, b1, w2, b2;
};

template <typename T>
struct ViewEncoderT {
  std::array<TensorT<T>, 3> emb_w, emb_b;  // roles: candidate, last, first/depot
  std::vector<AttnBlockT<T>> layers;
  TensorT<T> ln_out_g, ln_out_b;
};

template <typename T>
struct PolicyParamsT {
  ModelConfig config;
  std::vector<ViewEncoderT<T>> views;
  TensorT<T> qin_w, qin_b;
  std::vector<AttnBlockT<T>> dec_layers;  // decoder_layers - 1 full cross-attention blocks
  TensorT<T> lnf_g, lnf_b, out_wq, out_wk;

  // flat registry in fixed construction order (optimizer / checkpoint)
  std::vector<std::string> names;
  std::vector<TensorT<T>> tensors;

  size_t param_count() const {
    size_t total = 0;
    for (const auto& t : tensors) total += t.size();
    return total;
  }

  void set_requires_grad(bool v) {
    for (auto& t : tensors) t.set_requires_grad(v);
  }

  void zero_grad() {
    for (auto& t : tensors) t.zero_grad();
  }
};

using PolicyParams = PolicyParamsT<float>;

namespace policy_detail {

template <typename T>
class Builder {
 public:
  Builder(PolicyParamsT<T>& p, Rng& rng) : p_(p), rng_(rng) {}

  TensorT<T> weight(const std::string& name, int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    TensorT<T> t(rows, cols, T(0), true);
    for (auto& v : t.data()) v = static_cast<T>(rng_.uniform(-limit, limit));
    reg(name, t);
    return t;
  }

  TensorT<T> fill(const std::string& name, int cols, T value) {
    TensorT<T> t(1, cols, value, true);
    reg(name, t);
    return t;
  }

  // uniform fan-in bias: keeps every linear output row non-constant at init,
  // so layer norm never sees a zero-variance row
  TensorT<T> bias(const std::string& name, int fan_in, int cols) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    TensorT<T> t(1, cols, T(0), true);
    for (auto& v : t.data()) v = static_cast<T>(rng_.uniform(-limit, limit));
    reg(name, t);
    return t;
  }

  AttnBlockT<T> block(const std::string& prefix, int d, int dff) {
    AttnBlockT<T> b;
    b.ln1_g = fill(prefix + ".ln1.g", d, T(1));
    b.ln1_b = fill(prefix + ".ln1.b", d, T(0));
    b.wq = weight(prefix + ".attn.wq", d, d);
    b.bq = bias(prefix + ".attn.bq", d, d);
    b.wk = weight(prefix + ".attn.wk", d, d);
    b.wv = weight(prefix + ".attn.wv", d, d);
    b.bv = bias(prefix + ".attn.bv", d, d);
    b.wo = weight(prefix + ".attn.wo", d, d);
    b.bo = bias(prefix + ".attn.bo", d, d);
    b.ln2_g = fill(prefix + ".ln2.g", d, T(1));
    b.ln2_b = fill(prefix + ".ln2.b", d, T(0));
    b.w1 = weight(prefix + ".ff.w1", d, dff);
    b.b1 = bias(prefix + ".ff.b1", d, dff);
    b.w2 = weight(prefix + ".ff.w2", dff, d);
    b.b2 = bias(prefix + ".ff.b2", dff, d);
    return b;
  }

 private:
  void reg(const std::string& name, TensorT<T> t) {
    p_.names.push_back(name);
    p_.tensors.push_back(std::move(t));
  }
  PolicyParamsT<T>& p_;
  Rng& rng_;
};

}  // namespace policy_detail

/// Deterministic parameter initialisation (Xavier-uniform weights, fan-in
/// uniform linear biases, unit layer-norm gains) from a dedicated seed
/// stream.
template <typename T>
PolicyParamsT<T> init_policy(const ModelConfig& config, uint64_t seed) {
  config.validate();
  PolicyParamsT<T> p;
  p.config = config;
  Rng rng = Rng::stream(seed, {0x706f6c69});  // "poli"
  policy_detail::Builder<T> b(p, rng);
  static const char* kRoles[3] = {"cand", "last", "first"};
  const int d = config.d_model;
  const int D = config.d_model * config.n_views;

  for (int v = 0; v < config.n_views; ++v) {
    const std::string ev = "enc" + std::to_string(v);
    ViewEncoderT<T> enc;
    for (int role = 0; role < 3; ++role) {
      enc.emb_w[static_cast<size_t>(role)] =
          b.weight(ev + ".embed." + kRoles[role] + ".w", 3, d);
      enc.emb_b[static_cast<size_t>(role)] =
          b.bias(ev + ".embed." + kRoles[role] + ".b", 3, d);
    }
    for (int l = 0; l < config.encoder_layers_per_view; ++l)
      enc.layers.push_back(b.block(ev + ".l" + std::to_string(l), d, config.d_ff));
    enc.ln_out_g = b.fill(ev + ".ln_out.g", d, T(1));
    enc.ln_out_b = b.fill(ev + ".ln_out.b", d, T(0));
    p.views.push_back(std::move(enc));
  }

  p.qin_w = b.weight("dec.qin.w", 2 * D, D);
  p.qin_b = b.bias("dec.qin.b", 2 * D, D);
  for (int l = 0; l < config.decoder_layers - 1; ++l)
    p.dec_layers.push_back(b.block("dec.l" + std::to_string(l), D, config.d_ff));
  p.lnf_g = b.fill("dec.ln_f.g", D, T(1));
  p.lnf_b = b.fill("dec.ln_f.b", D, T(0));
  p.out_wq = b.weight("dec.out.wq", D, d);
  p.out_wk = b.weight("dec.out.wk", D, d);
  return p;
}

/// Deep copy; `requires_grad` applies to the copy (false for baselines).
template <typename T>
PolicyParamsT<T> clone_policy(const PolicyParamsT<T>& src, bool requires_grad) {
  PolicyParamsT<T> out = init_policy<T>(src.config, 0);
  for (size_t i = 0; i < out.tensors.size(); ++i) {
    out.tensors[i].data() = src.tensors[i].data();
    out.tensors[i].set_requires_grad(requires_grad);
  }
  return out;
}

/// Copies parameter values from src into dst (baseline replacement).
template <typename T>
void copy_policy_data(PolicyParamsT<T>& dst, const PolicyParamsT<T>& src) {
  if (dst.tensors.size() != src.tensors.size())
    throw LogicError("copy_policy_data: parameter registry mismatch");
  for (size_t i = 0; i < dst.tensors.size(); ++i) dst.tensors[i].data() = src.tensors[i].data();
}

/// Per-layer encoder attention rows captured for the analysis module.
template <typename T>
struct AttnCaptureT {
  struct Layer {
    int view_index = 0;
    int view_k = 0;
    int layer_index = 0;
    int n_heads = 0;
    int rows = 0;               // == node_ids.size(); keys == queries here
    std::vector<int> node_ids;  // subgraph rows: candidates..., last, first
    std::vector<T> probs;       // n_heads stacked (rows x rows) blocks
  };
  std::vector<Layer> layers;
};

namespace policy_detail {

template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  return add(matmul(x, w), b);
}

/// Pre-norm block: x += MHA(LN(x)); x += FF(LN(x)). When kv is supplied the
/// attention is cross-attention (keys/values from kv, already encoded).
template <typename T>
TensorT<T> attn_block(const TensorT<T>& x_in, const AttnBlockT<T>& blk, int n_heads,
                      const TensorT<T>* kv = nullptr, std::vector<T>* probs_out = nullptr) {
  TensorT<T> x = x_in;
  TensorT<T> a = layer_norm(x, blk.ln1_g, blk.ln1_b);
  const TensorT<T>& src = kv ? *kv : a;
  TensorT<T> q = linear(a, blk.wq, blk.bq);
  TensorT<T> k = matmul(src, blk.wk);
  TensorT<T> v = linear(src, blk.wv, blk.bv);
  TensorT<T> m = multihead_attention(q, k, v, n_heads, probs_out);
  x = add(x, linear(m, blk.wo, blk.bo));
  TensorT<T> h = layer_norm(x, blk.ln2_g, blk.ln2_b);
  x = add(x, linear(gelu(linear(h, blk.w1, blk.b1)), blk.w2, blk.b2));
  return x;
}

}  // namespace policy_detail

/// Encodes one view's subgraph. Inputs are the three role feature matrices
/// (candidates m x 3, last 1 x 3, first 1 x 3); output is (m+2) x d_model
/// with rows ordered candidates..., last, first. No positional encoding, so
/// the output rows permute exactly with candidate input order.
template <typename T>
TensorT<T> encode_view(const TensorT<T>& cand_feats, const TensorT<T>& last_feats,
                       const TensorT<T>& first_feats, const PolicyParamsT<T>& params,
                       int view_index, AttnCaptureT<T>* capture = nullptr) {
  if (view_index < 0 || view_index >= static_cast<int>(params.views.size()))
    throw LogicError("encode_view: view index out of range");
  const auto& enc = params.views[static_cast<size_t>(view_index)];
  TensorT<T> h_cand = policy_detail::linear(cand_feats, enc.emb_w[0], enc.emb_b[0]);
  TensorT<T> h_last = policy_detail::linear(last_feats, enc.emb_w[1], enc.emb_b[1]);
  TensorT<T> h_first = policy_detail::linear(first_feats, enc.emb_w[2], enc.emb_b[2]);
  TensorT<T> h = concat_rows<T>({h_cand, h_last, h_first});
  for (size_t l = 0; l < enc.layers.size(); ++l) {
    std::vector<T>* probs_out = nullptr;
    if (capture) {
      capture->layers.emplace_back();
      auto& rec = capture->layers.back();
      rec.view_index = view_index;
      rec.layer_index = static_cast<int>(l);
      rec.n_heads = params.config.n_heads;
      rec.rows = h.rows();
      probs_out = &rec.probs;
    }
    h = policy_detail::attn_block<T>(h, enc.layers[l], params.config.n_heads, nullptr, probs_out);
  }
  return layer_norm(h, enc.ln_out_g, enc.ln_out_b);
}

/// Channel-wise fusion: for every intersection row (A^p candidates, then
/// last, then first) concatenate its per-view embeddings ordered by
/// ascending view k. Output: (|A^p|+2) x (n_views * d_model).
template <typename T>
TensorT<T> fuse_views(const ViewSet& vs, const std::vector<TensorT<T>>& view_embeddings) {
  if (vs.views.size() != view_embeddings.size())
    throw LogicError("fuse_views: embedding count mismatch");
  std::vector<TensorT<T>> parts;
  // views are stored with descending k; ascending k = reverse order
  for (size_t vi = vs.views.size(); vi-- > 0;) {
    const View& view = vs.views[vi];
    const int m = static_cast<int>(view.nodes.size());
    std::vector<int> rows;
    rows.reserve(vs.candidates.size() + 2);
    for (int cand : vs.candidates) {
      int row = -1;
      for (int i = 0; i < m; ++i)
        if (view.nodes[static_cast<size_t>(i)] == cand) {
          row = i;
          break;
        }
      if (row < 0) throw LogicError("fuse_views: candidate missing from a view");
      rows.push_back(row);
    }
    rows.push_back(m);      // last
    rows.push_back(m + 1);  // first
    parts.push_back(gather_rows(view_embeddings[vi], rows));
  }
  return parts.size() == 1 ? parts[0] : concat_cols(parts);
}

/// Multi-view decoder: the concatenated (last, first) embeddings form the
/// query; candidates are keys/values through decoder_layers-1 cross-attention
/// blocks; the final layer is single-head without values and its attention
/// weights are the output probabilities: Softmax(C * tanh(QK^T / sqrt(d_K))).
template <typename T>
TensorT<T> decode(const TensorT<T>& fused, const PolicyParamsT<T>& params) {
  const int p = fused.rows() - 2;
  if (p < 1) throw LogicError("decode: need at least one candidate row");
  std::vector<int> cand_rows(static_cast<size_t>(p));
  for (int i = 0; i < p; ++i) cand_rows[static_cast<size_t>(i)] = i;
  TensorT<T> e_cand = gather_rows(fused, cand_rows);
  TensorT<T> q_last = gather_rows(fused, {p});
  TensorT<T> q_first = gather_rows(fused, {p + 1});
  TensorT<T> q = policy_detail::linear(concat_cols<T>({q_last, q_first}), params.qin_w,
                                       params.qin_b);
  for (const auto& blk : params.dec_layers)
    q = policy_detail::attn_block(q, blk, params.config.n_heads, &e_cand);
  TensorT<T> qf = layer_norm(q, params.lnf_g, params.lnf_b);
  TensorT<T> qq = matmul(qf, params.out_wq);
  TensorT<T> kk = matmul(e_cand, params.out_wk);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.config.d_model));
  TensorT<T> logits =
      scale(tanh_elem(scale(matmul_nt(qq, kk), inv_sqrt_dk)), params.config.c_clip);
  return softmax_rows(logits);
}

template <typename T>
struct PolicyStepResultT {
  std::vector<int> candidates;  // A^p, aligned with cand_probs columns
  TensorT<T> cand_probs;        // 1 x |A^p|
};

/// Full policy evaluation for one state. The probability vector's support is
/// exactly A^p by construction (only candidate rows are scored).
template <typename T>
PolicyStepResultT<T> policy_step(const State& state, const PolicyParamsT<T>& params,
                                 AttnCaptureT<T>* capture = nullptr) {
  const ModelConfig& cfg = params.config;
  const Instance& inst = *state.instance;

  std::vector<int> k_list = cfg.k_list;
  if (cfg.global_view) {
    // the largest view spans every feasible node; keep the list descending
    int floor_k = k_list.size() > 1 ? k_list[1] + 1 : 1;
    k_list[0] = std::max(inst.n(), floor_k);
  }
  ViewSet vs = extract_views(state, k_list);

  auto feats = [&](int node, const Vec2& norm, double extra) {
    const Vec2& c = cfg.invariance_off ? inst.coords[static_cast<size_t>(node)] : norm;
    return std::vector<T>{static_cast<T>(c[0]), static_cast<T>(c[1]), static_cast<T>(extra)};
  };

  std::vector<TensorT<T>> embs;
  embs.reserve(vs.views.size());
  for (size_t vi = 0; vi < vs.views.size(); ++vi) {
    const View& view = vs.views[vi];
    const int m = static_cast<int>(view.nodes.size());
    std::vector<T> cand_data;
    cand_data.reserve(static_cast<size_t>(m) * 3);
    for (int i = 0; i < m; ++i) {
      auto f = feats(view.nodes[static_cast<size_t>(i)], view.norm[static_cast<size_t>(i)],
                     view.extra[static_cast<size_t>(i)]);
      cand_data.insert(cand_data.end(), f.begin(), f.end());
    }
    TensorT<T> cand_feats = TensorT<T>::from(std::move(cand_data), m, 3);
    TensorT<T> last_feats =
        TensorT<T>::from(feats(vs.last, view.last_norm, view.last_extra), 1, 3);
    TensorT<T> first_feats = TensorT<T>::from(feats(vs.first, view.first_norm, 0.0), 1, 3);

    AttnCaptureT<T> local_capture;
    AttnCaptureT<T>* cap = capture ? &local_capture : nullptr;
    embs.push_back(encode_view(cand_feats, last_feats, first_feats, params,
                               static_cast<int>(vi), cap));
    if (capture) {
      for (auto& layer : local_capture.layers) {
        layer.view_k = view.k;
        layer.node_ids = view.nodes;
        layer.node_ids.push_back(vs.last);
        layer.node_ids.push_back(vs.first);
        capture->layers.push_back(std::move(layer));
      }
    }
  }

  PolicyStepResultT<T> out;
  out.candidates = vs.candidates;
  out.cand_probs = decode(fuse_views(vs, embs), params);
  return out;
}

/// Expands candidate probabilities to a full-size vector over all nodes
/// (exact zeros outside A^p).
template <typename T>
std::vector<double> full_probs(const PolicyStepResultT<T>& step, int n) {
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (size_t i = 0; i < step.candidates.size(); ++i)
    out[static_cast<size_t>(step.candidates[i])] =
        static_cast<double>(step.cand_probs.data()[i]);
  return out;
}

}  // namespace invit
