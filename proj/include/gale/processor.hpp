#pragma once

#include <vector>

#include "gale/layers.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Grouped Reversible processing stack.  Each block splits the width-N node
// matrix into C groups and applies
//
//   V'_0 = sum_{k=2..C} V_k
//   V'_k = f_wk(V'_{k-1}, A, E) + V_k,   k = 1..C
//
// which is exactly invertible, so the backward pass reconstructs block inputs
// from outputs instead of storing them.
// ---------------------------------------------------------------------------

struct ProcessorConfig {
  int layers{30};   // L
  int groups{4};    // C
  int latent{128};  // N
  LayerConfig layer;

  int group_width() const { return latent / groups; }

  void check() const {
    if (layers < 1) throw ConfigError("processor needs at least one layer");
    if (groups < 2) throw ConfigError("reversibility needs at least two groups");
    if (latent % groups != 0) throw ConfigError("group count must divide latent width");
    if (layer.kind == LayerKind::GAT && group_width() % layer.heads != 0)
      throw ConfigError("gat heads must divide the group width");
  }
};

/// Counts activation matrices retained across kernel boundaries; the memory
/// contract of the reversible engine is asserted against its peak.
struct ActivationMeter {
  long current{0};
  long peak{0};

  void acquire(long n) {
    current += n;
    if (current > peak) peak = current;
  }
  void release(long n) { current -= n; }
  void reset() { current = peak = 0; }
};

template <typename T = double>
struct ProcessorParams {
  ProcessorConfig config;
  std::vector<KernelParams<T>> kernels;  // layer-major: index l*C + k

  KernelParams<T>& at(int layer, int group) { return kernels[layer * config.groups + group]; }
  const KernelParams<T>& at(int layer, int group) const {
    return kernels[layer * config.groups + group];
  }

  template <typename F>
  void visit(F&& f) {
    for (int l = 0; l < config.layers; ++l)
      for (int k = 0; k < config.groups; ++k)
        visit_kernel(kernels[l * config.groups + k],
                     "proc.layer" + std::to_string(l) + ".group" + std::to_string(k), f);
  }

  ProcessorParams<T> zero_clone() const {
    ProcessorParams<T> g;
    g.config = config;
    g.kernels.reserve(kernels.size());
    for (const auto& k : kernels) g.kernels.push_back(zero_like(k));
    return g;
  }

  template <typename U>
  ProcessorParams<U> cast() const {
    ProcessorParams<U> out;
    out.config = config;
    out.kernels.reserve(kernels.size());
    for (const auto& k : kernels) {
      std::visit(
          [&out](const auto& kp) {
            auto copy = kp;  // same scalar type; convert tensor by tensor
            using Src = std::decay_t<decltype(kp)>;
            (void)copy;
            if constexpr (std::is_same_v<Src, GatParams<T>>) {
              GatParams<U> q;
              q.w = kp.w.template cast<U>();
              q.a_src = kp.a_src.template cast<U>();
              q.a_dst = kp.a_dst.template cast<U>();
              q.pe.w = kp.pe.w.template cast<U>();
              q.pe.b = kp.pe.b.template cast<U>();
              q.a_edge = kp.a_edge.template cast<U>();
              q.bias = kp.bias.template cast<U>();
              q.ln.gamma = kp.ln.gamma.template cast<U>();
              q.ln.beta = kp.ln.beta.template cast<U>();
              out.kernels.push_back(std::move(q));
            } else if constexpr (std::is_same_v<Src, GineParams<T>>) {
              GineParams<U> q;
              q.pe.w = kp.pe.w.template cast<U>();
              q.pe.b = kp.pe.b.template cast<U>();
              q.eps = kp.eps.template cast<U>();
              q.mlp.a1.w = kp.mlp.a1.w.template cast<U>();
              q.mlp.a1.b = kp.mlp.a1.b.template cast<U>();
              q.mlp.a2.w = kp.mlp.a2.w.template cast<U>();
              q.mlp.a2.b = kp.mlp.a2.b.template cast<U>();
              q.mlp.a3.w = kp.mlp.a3.w.template cast<U>();
              q.mlp.a3.b = kp.mlp.a3.b.template cast<U>();
              q.mlp.has_norm = kp.mlp.has_norm;
              q.mlp.norm.gamma = kp.mlp.norm.gamma.template cast<U>();
              q.mlp.norm.beta = kp.mlp.norm.beta.template cast<U>();
              out.kernels.push_back(std::move(q));
            } else {
              GenParams<U> q;
              q.pe.w = kp.pe.w.template cast<U>();
              q.pe.b = kp.pe.b.template cast<U>();
              q.inv_temp = kp.inv_temp.template cast<U>();
              q.mlp.a1.w = kp.mlp.a1.w.template cast<U>();
              q.mlp.a1.b = kp.mlp.a1.b.template cast<U>();
              q.mlp.a2.w = kp.mlp.a2.w.template cast<U>();
              q.mlp.a2.b = kp.mlp.a2.b.template cast<U>();
              q.mlp.a3.w = kp.mlp.a3.w.template cast<U>();
              q.mlp.a3.b = kp.mlp.a3.b.template cast<U>();
              q.mlp.has_norm = kp.mlp.has_norm;
              q.mlp.norm.gamma = kp.mlp.norm.gamma.template cast<U>();
              q.mlp.norm.beta = kp.mlp.norm.beta.template cast<U>();
              out.kernels.push_back(std::move(q));
            }
          },
          k);
    }
    return out;
  }
};

template <typename T>
ProcessorParams<T> make_processor(const ProcessorConfig& cfg, Rng& rng) {
  cfg.check();
  ProcessorParams<T> p;
  p.config = cfg;
  p.kernels.reserve(static_cast<size_t>(cfg.layers) * cfg.groups);
  for (int l = 0; l < cfg.layers; ++l)
    for (int k = 0; k < cfg.groups; ++k)
      p.kernels.push_back(make_kernel<T>(cfg.layer, cfg.latent, cfg.group_width(), rng));
  return p;
}

// ---------------------------------------------------------------------------
// Shared group helpers
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::vector<Tensor<T>> split_width(const Tensor<T>& v, int groups) {
  const int gw = v.cols() / groups;
  if (gw * groups != v.cols()) throw ConfigError("groups must divide latent width");
  std::vector<Tensor<T>> out(groups);
  for (int k = 0; k < groups; ++k) {
    out[k] = Tensor<T>(v.rows(), gw);
    for (int i = 0; i < v.rows(); ++i)
      std::copy(v.row(i) + k * gw, v.row(i) + (k + 1) * gw, out[k].row(i));
  }
  return out;
}

template <typename T>
Tensor<T> merge_width(const std::vector<Tensor<T>>& groups) {
  const int gw = groups.front().cols();
  Tensor<T> out(groups.front().rows(), gw * static_cast<int>(groups.size()));
  for (size_t k = 0; k < groups.size(); ++k)
    for (int i = 0; i < out.rows(); ++i)
      std::copy(groups[k].row(i), groups[k].row(i) + gw, out.row(i) + k * gw);
  return out;
}

/// V'_0 = sum of groups 2..C (zero-based 1..C-1).
template <typename T>
Tensor<T> tail_sum(const std::vector<Tensor<T>>& groups) {
  Tensor<T> s = groups[1];
  for (size_t k = 2; k < groups.size(); ++k) s += groups[k];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-block forward / inverse
// ---------------------------------------------------------------------------

/// One reversible block over pre-split groups; kernels[k] is f_w(k+1).
template <typename T>
std::vector<Tensor<T>> rev_block_forward_groups(const KernelParams<T>* kernels,
                                                const GraphTopo& topo, const Tensor<T>& e_lat,
                                                const std::vector<Tensor<T>>& v) {
  const int C = static_cast<int>(v.size());
  std::vector<Tensor<T>> out(C);
  Tensor<T> prev = detail::tail_sum(v);
  for (int k = 0; k < C; ++k) {
    Tensor<T> f = kernel_forward(kernels[k], topo, prev, e_lat, static_cast<KernelCache<T>*>(nullptr));
    f += v[k];
    out[k] = std::move(f);
    prev = out[k];
  }
  return out;
}

/// Merged-matrix convenience wrapper for one block.
template <typename T>
Tensor<T> rev_block_forward(const KernelParams<T>* kernels, const GraphTopo& topo,
                            const Tensor<T>& e_lat, const Tensor<T>& v, int groups) {
  return detail::merge_width(rev_block_forward_groups(kernels, topo, e_lat, detail::split_width(v, groups)));
}

/// Exact algebraic inverse of one block.  When `caches` is non-null it
/// receives the kernel caches at the reconstructed inputs, ready for the
/// block's backward pass.
template <typename T>
std::vector<Tensor<T>> rev_block_inverse_groups(const KernelParams<T>* kernels,
                                                const GraphTopo& topo, const Tensor<T>& e_lat,
                                                const std::vector<Tensor<T>>& v_out,
                                                std::vector<KernelCache<T>>* caches,
                                                ActivationMeter* meter = nullptr) {
  const int C = static_cast<int>(v_out.size());
  std::vector<Tensor<T>> v(C);
  if (caches) caches->resize(C);
  for (int k = C - 1; k >= 1; --k) {
    Tensor<T> f = kernel_forward(kernels[k], topo, v_out[k - 1], e_lat, caches ? &(*caches)[k] : nullptr);
    if (meter && caches) meter->acquire(cache_tensor_count((*caches)[k]));
    Tensor<T> vk = v_out[k];
    vk -= f;
    v[k] = std::move(vk);
    if (meter) meter->acquire(1);
  }
  Tensor<T> v0 = detail::tail_sum(v);
  Tensor<T> f0 = kernel_forward(kernels[0], topo, v0, e_lat, caches ? &(*caches)[0] : nullptr);
  if (meter && caches) meter->acquire(cache_tensor_count((*caches)[0]));
  Tensor<T> v1 = v_out[0];
  v1 -= f0;
  v[0] = std::move(v1);
  if (meter) meter->acquire(1);
  return v;
}

template <typename T>
Tensor<T> rev_block_inverse(const KernelParams<T>* kernels, const GraphTopo& topo,
                            const Tensor<T>& e_lat, const Tensor<T>& v_out, int groups) {
  return detail::merge_width(rev_block_inverse_groups(
      kernels, topo, e_lat, detail::split_width(v_out, groups),
      static_cast<std::vector<KernelCache<T>>*>(nullptr)));
}

// ---------------------------------------------------------------------------
// Full-stack forward / inverse / memory-frugal backward
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> rev_forward(const ProcessorParams<T>& p, const GraphTopo& topo, const Tensor<T>& e_lat,
                      const Tensor<T>& v_in) {
  const int C = p.config.groups;
  std::vector<Tensor<T>> v = detail::split_width(v_in, C);
  for (int l = 0; l < p.config.layers; ++l)
    v = rev_block_forward_groups(&p.kernels[l * C], topo, e_lat, v);
  return detail::merge_width(v);
}

template <typename T>
Tensor<T> rev_inverse(const ProcessorParams<T>& p, const GraphTopo& topo, const Tensor<T>& e_lat,
                      const Tensor<T>& v_out) {
  const int C = p.config.groups;
  std::vector<Tensor<T>> v = detail::split_width(v_out, C);
  for (int l = p.config.layers - 1; l >= 0; --l)
    v = rev_block_inverse_groups(&p.kernels[l * C], topo, e_lat, v,
                                 static_cast<std::vector<KernelCache<T>>*>(nullptr));
  return detail::merge_width(v);
}

/// Backward gradients of one block given output-side group grads `dg` and the
/// caches produced at the reconstructed inputs.  Accumulates into `grads` and
/// `de_lat`; returns input-side group grads.
template <typename T>
std::vector<Tensor<T>> rev_block_backward_groups(const KernelParams<T>* kernels,
                                                 const std::vector<KernelCache<T>>& caches,
                                                 const GraphTopo& topo, const Tensor<T>& e_lat,
                                                 std::vector<Tensor<T>> dg, KernelParams<T>* grads,
                                                 Tensor<T>& de_lat) {
  const int C = static_cast<int>(dg.size());
  std::vector<Tensor<T>> dv(C);
  Tensor<T> g0;
  for (int k = C - 1; k >= 0; --k) {
    dv[k] = dg[k];  // residual path
    Tensor<T> din = kernel_backward(kernels[k], caches[k], topo, e_lat, dg[k], grads[k], de_lat);
    if (k >= 1)
      dg[k - 1] += din;
    else
      g0 = std::move(din);
  }
  for (int k = 1; k < C; ++k) dv[k] += g0;  // V'_0 fan-out to groups 2..C
  return dv;
}

template <typename T>
struct ProcessorBackwardResult {
  Tensor<T> dv_in;
  Tensor<T> de_lat;
};

/// Reverse-mode pass that retains only the final activation: each block's
/// input is reconstructed by the algebraic inverse (one extra kernel
/// evaluation per group), then the block's analytic backward runs on the
/// cached intermediates.
template <typename T>
ProcessorBackwardResult<T> rev_backward(const ProcessorParams<T>& p, const GraphTopo& topo,
                                        const Tensor<T>& e_lat, const Tensor<T>& v_final,
                                        const Tensor<T>& dv_final, ProcessorParams<T>& grads,
                                        ActivationMeter* meter = nullptr) {
  const int C = p.config.groups;
  std::vector<Tensor<T>> v_out = detail::split_width(v_final, C);
  if (meter) meter->acquire(C);
  std::vector<Tensor<T>> dg = detail::split_width(dv_final, C);
  Tensor<T> de_lat(e_lat.rows(), e_lat.cols());

  for (int l = p.config.layers - 1; l >= 0; --l) {
    std::vector<KernelCache<T>> caches;
    std::vector<Tensor<T>> v_in =
        rev_block_inverse_groups(&p.kernels[l * C], topo, e_lat, v_out, &caches, meter);
    for (const auto& vg : v_in)
      if (!vg.all_finite())
        throw NumericError("non-finite activation reconstructed in processor layer " +
                           std::to_string(l));
    dg = rev_block_backward_groups(&p.kernels[l * C], caches, topo, e_lat, std::move(dg),
                                   &grads.kernels[l * C], de_lat);
    long cache_tensors = 0;
    for (const auto& c : caches) cache_tensors += cache_tensor_count(c);
    caches.clear();
    if (meter) meter->release(cache_tensors + C);  // caches + previous output groups
    v_out = std::move(v_in);
  }
  if (meter) meter->release(C);  // the block-input groups handed back

  ProcessorBackwardResult<T> out;
  out.dv_in = detail::merge_width(dg);
  out.de_lat = std::move(de_lat);
  return out;
}

// ---------------------------------------------------------------------------
// Stored-activation reference engine.  A deliberately straightforward
// evaluation of the block recurrence that keeps every kernel cache from the
// forward pass; used to cross-check gradients and the memory contract.
// ---------------------------------------------------------------------------

template <typename T>
struct ReferenceTape {
  std::vector<std::vector<KernelCache<T>>> caches;  // [layer][group]
};

template <typename T>
Tensor<T> reference_forward(const ProcessorParams<T>& p, const GraphTopo& topo,
                            const Tensor<T>& e_lat, const Tensor<T>& v_in, ReferenceTape<T>* tape,
                            ActivationMeter* meter = nullptr) {
  const int C = p.config.groups;
  std::vector<Tensor<T>> v = detail::split_width(v_in, C);
  if (meter) meter->acquire(C);
  if (tape) tape->caches.assign(p.config.layers, {});
  for (int l = 0; l < p.config.layers; ++l) {
    std::vector<KernelCache<T>> block_caches(C);
    std::vector<Tensor<T>> out(C);
    Tensor<T> prev = detail::tail_sum(v);
    for (int k = 0; k < C; ++k) {
      Tensor<T> f =
          kernel_forward(p.kernels[l * C + k], topo, prev, e_lat, tape ? &block_caches[k] : nullptr);
      if (meter && tape) meter->acquire(cache_tensor_count(block_caches[k]));
      f += v[k];
      out[k] = std::move(f);
      if (meter) meter->acquire(1);
      prev = out[k];
    }
    if (meter) meter->release(C);  // inputs of this block replaced by outputs
    v = std::move(out);
    if (tape) tape->caches[l] = std::move(block_caches);
  }
  return detail::merge_width(v);
}

template <typename T>
ProcessorBackwardResult<T> reference_backward(const ProcessorParams<T>& p,
                                              const ReferenceTape<T>& tape, const GraphTopo& topo,
                                              const Tensor<T>& e_lat, const Tensor<T>& dv_final,
                                              ProcessorParams<T>& grads) {
  const int C = p.config.groups;
  std::vector<Tensor<T>> dg = detail::split_width(dv_final, C);
  Tensor<T> de_lat(e_lat.rows(), e_lat.cols());
  for (int l = p.config.layers - 1; l >= 0; --l)
    dg = rev_block_backward_groups(&p.kernels[l * C], tape.caches[l], topo, e_lat, std::move(dg),
                                   &grads.kernels[l * C], de_lat);
  ProcessorBackwardResult<T> out;
  out.dv_in = detail::merge_width(dg);
  out.de_lat = std::move(de_lat);
  return out;
}

// ---------------------------------------------------------------------------
// Memory contract instrumentation
// ---------------------------------------------------------------------------

namespace detail {

inline GraphTopo ring_topology(int n_nodes) {
  std::vector<Edge> edges;
  for (int i = 0; i < n_nodes; ++i) {
    int j = (i + 1) % n_nodes;
    edges.push_back({i, j});
    edges.push_back({j, i});
  }
  return GraphTopo::build(n_nodes, std::move(edges));
}

}  // namespace detail

/// Peak number of retained activation matrices during rev_backward on an
/// n-node ring graph.  Bounded by a constant times C, independent of L.
inline long peak_activation_count(const ProcessorConfig& cfg, int n_nodes) {
  Rng rng(41);
  ProcessorParams<double> p = make_processor<double>(cfg, rng);
  GraphTopo topo = detail::ring_topology(n_nodes);
  Tensor<double> e_lat(static_cast<int>(topo.edges.size()), cfg.latent);
  Tensor<double> v(n_nodes, cfg.latent);
  for (size_t i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-1.0, 1.0);
  for (size_t i = 0; i < e_lat.size(); ++i) e_lat.data()[i] = rng.uniform(-1.0, 1.0);

  Tensor<double> v_final = rev_forward(p, topo, e_lat, v);
  Tensor<double> dv(n_nodes, cfg.latent);
  dv.fill(1.0);
  ProcessorParams<double> grads = p.zero_clone();
  ActivationMeter meter;
  rev_backward(p, topo, e_lat, v_final, dv, grads, &meter);
  return meter.peak;
}

/// Same instrumentation for the stored-activation reference (forward tape
/// plus backward); grows linearly with L.
inline long reference_peak_activation_count(const ProcessorConfig& cfg, int n_nodes) {
  Rng rng(41);
  ProcessorParams<double> p = make_processor<double>(cfg, rng);
  GraphTopo topo = detail::ring_topology(n_nodes);
  Tensor<double> e_lat(static_cast<int>(topo.edges.size()), cfg.latent);
  Tensor<double> v(n_nodes, cfg.latent);
  for (size_t i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-1.0, 1.0);
  for (size_t i = 0; i < e_lat.size(); ++i) e_lat.data()[i] = rng.uniform(-1.0, 1.0);

  ActivationMeter meter;
  ReferenceTape<double> tape;
  Tensor<double> v_final = reference_forward(p, topo, e_lat, v, &tape, &meter);
  Tensor<double> dv(n_nodes, cfg.latent);
  dv.fill(1.0);
  ProcessorParams<double> grads = p.zero_clone();
  reference_backward(p, tape, topo, e_lat, dv, grads);
  return meter.peak;
}

}  // namespace gale
