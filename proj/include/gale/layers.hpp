#pragma once

#include <variant>

#include "gale/graph.hpp"
#include "gale/nn.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Message-passing kernels f_wk used inside the reversible groups.  All three
// map a group-width node matrix to a group-width output and consume the
// full-width latent edge features through a learned projection.
// ---------------------------------------------------------------------------

enum class LayerKind { GAT, GINE, GEN };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::GAT: return "gat";
    case LayerKind::GINE: return "gine";
    case LayerKind::GEN: return "gen";
  }
  return "?";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
  if (s == "gat") return LayerKind::GAT;
  if (s == "gine") return LayerKind::GINE;
  if (s == "gen") return LayerKind::GEN;
  throw ConfigError("unknown layer kind '" + s + "'");
}

struct LayerConfig {
  LayerKind kind{LayerKind::GINE};
  int heads{2};        // GAT attention heads
  int gine_hidden{8};  // update-MLP hidden width
  int gen_hidden{6};

  // Edge-projection width for GAT; sized so the per-layer parameter budget
  // lands in the 4.5k-5k window at group width 32.
  int gat_edge_dim(int group_width) const { return std::max(4, (7 * group_width) / 8); }
};

/// Topology view shared by all kernels: directed edge list plus CSR indexes
/// by destination (aggregation) and by source (gradient scatter).
struct GraphTopo {
  int num_nodes{0};
  std::vector<Edge> edges;
  CsrIn in;
  CsrIn out;

  static GraphTopo build(int n, std::vector<Edge> e) {
    GraphTopo t;
    t.num_nodes = n;
    t.edges = std::move(e);
    t.in = build_csr_in(n, t.edges);
    t.out = build_csr_out(n, t.edges);
    return t;
  }
};

constexpr double kGatLeakySlope = 0.2;
constexpr double kGenMessageEps = 1e-7;

/// Running count of kernel forward evaluations; the reversible backward's
/// extra reconstruction pass is measured against it.
inline long& kernel_eval_count() {
  static long count = 0;
  return count;
}

// ---------------------------------------------------------------------------
// GAT: two-head masked attention with an edge term in the logit, LayerNorm on
// the concatenated head outputs.
// ---------------------------------------------------------------------------

template <typename T = double>
struct GatParams {
  Tensor<T> w;       // gw x gw (heads * head_dim)
  Tensor<T> a_src;   // heads x head_dim
  Tensor<T> a_dst;   // heads x head_dim
  AffineP<T> pe;     // edge projection, N -> edge_dim
  Tensor<T> a_edge;  // heads x edge_dim
  Tensor<T> bias;    // 1 x gw
  LayerNormP<T> ln;  // gw

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w", w);
    f(prefix + ".a_src", a_src);
    f(prefix + ".a_dst", a_dst);
    pe.visit(prefix + ".pe", f);
    f(prefix + ".a_edge", a_edge);
    f(prefix + ".bias", bias);
    ln.visit(prefix + ".ln", f);
  }
};

template <typename T = double>
struct GatCache {
  Tensor<T> x;    // n x gw
  Tensor<T> z;    // n x gw
  Tensor<T> pe;   // m x edge_dim
  Tensor<T> raw;  // m x heads, pre-leaky logits
  Tensor<T> att;  // m x heads
  LayerNormCache<T> ln;
  int tensor_count() const { return 5 + ln.tensor_count(); }
};

template <typename T>
Tensor<T> gat_forward(const GatParams<T>& p, const GraphTopo& topo, const Tensor<T>& x,
                      const Tensor<T>& e_lat, GatCache<T>* cache) {
  const int n = x.rows();
  const int gw = x.cols();
  const int heads = p.a_src.rows();
  const int dh = gw / heads;
  const int m = static_cast<int>(topo.edges.size());
  if (gw % heads != 0) throw ShapeError("gat: head count must divide group width");

  Tensor<T> z = matmul(x, p.w);
  Tensor<T> pe = affine_forward(p.pe, e_lat);

  Tensor<T> s_src(n, heads), s_dst(n, heads);
  for (int i = 0; i < n; ++i) {
    for (int h = 0; h < heads; ++h) {
      T ss = T(0), sd = T(0);
      const T* zr = z.row(i) + h * dh;
      for (int d = 0; d < dh; ++d) {
        ss += zr[d] * p.a_src(h, d);
        sd += zr[d] * p.a_dst(h, d);
      }
      s_src(i, h) = ss;
      s_dst(i, h) = sd;
    }
  }

  Tensor<T> raw(m, heads);
  for (int e = 0; e < m; ++e) {
    const Edge& ed = topo.edges[e];
    const T* per = pe.row(e);
    for (int h = 0; h < heads; ++h) {
      T se = T(0);
      for (int d = 0; d < pe.cols(); ++d) se += per[d] * p.a_edge(h, d);
      raw(e, h) = s_src(ed.src, h) + s_dst(ed.dst, h) + se;
    }
  }

  // Per-destination softmax over leaky-rectified logits.
  Tensor<T> att(m, heads);
  for (int i = 0; i < n; ++i) {
    int begin = topo.in.offsets[i], end = topo.in.offsets[i + 1];
    if (begin == end) continue;
    for (int h = 0; h < heads; ++h) {
      T mx = -std::numeric_limits<T>::infinity();
      for (int k = begin; k < end; ++k) {
        int e = topo.in.edge_ids[k];
        T v = raw(e, h);
        T lk = v > T(0) ? v : T(kGatLeakySlope) * v;
        if (lk > mx) mx = lk;
      }
      T denom = T(0);
      for (int k = begin; k < end; ++k) {
        int e = topo.in.edge_ids[k];
        T v = raw(e, h);
        T lk = v > T(0) ? v : T(kGatLeakySlope) * v;
        T ex = std::exp(lk - mx);
        att(e, h) = ex;
        denom += ex;
      }
      for (int k = begin; k < end; ++k) att(topo.in.edge_ids[k], h) /= denom;
    }
  }

  // Weighted aggregation of transformed source features; isolated nodes get a
  // zero aggregate.
  Tensor<T> pre(n, gw);
  for (int i = 0; i < n; ++i) {
    T* out = pre.row(i);
    for (int k = topo.in.offsets[i]; k < topo.in.offsets[i + 1]; ++k) {
      int e = topo.in.edge_ids[k];
      const T* zr = z.row(topo.edges[e].src);
      for (int h = 0; h < heads; ++h) {
        T a = att(e, h);
        for (int d = 0; d < dh; ++d) out[h * dh + d] += a * zr[h * dh + d];
      }
    }
    for (int j = 0; j < gw; ++j) out[j] += p.bias(0, j);
  }

  Tensor<T> y = layer_norm_forward(p.ln, pre, cache ? &cache->ln : nullptr);
  if (cache) {
    cache->x = x;
    cache->z = std::move(z);
    cache->pe = std::move(pe);
    cache->raw = std::move(raw);
    cache->att = std::move(att);
  }
  return y;
}

template <typename T>
Tensor<T> gat_backward(const GatParams<T>& p, const GatCache<T>& cache, const GraphTopo& topo,
                       const Tensor<T>& e_lat, const Tensor<T>& dy, GatParams<T>& grads,
                       Tensor<T>& de_lat) {
  const int n = cache.x.rows();
  const int gw = cache.x.cols();
  const int heads = p.a_src.rows();
  const int dh = gw / heads;
  const int m = static_cast<int>(topo.edges.size());

  Tensor<T> dpre = layer_norm_backward(p.ln, cache.ln, dy, grads.ln);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < gw; ++j) grads.bias(0, j) += dpre(i, j);

  // Attention and transformed-feature gradients.
  Tensor<T> dz(n, gw);
  Tensor<T> datt(m, heads);
  for (int i = 0; i < n; ++i) {
    const T* dr = dpre.row(i);
    for (int k = topo.in.offsets[i]; k < topo.in.offsets[i + 1]; ++k) {
      int e = topo.in.edge_ids[k];
      int s = topo.edges[e].src;
      const T* zr = cache.z.row(s);
      T* dzr = dz.row(s);
      for (int h = 0; h < heads; ++h) {
        T a = cache.att(e, h);
        T acc = T(0);
        for (int d = 0; d < dh; ++d) {
          acc += dr[h * dh + d] * zr[h * dh + d];
          dzr[h * dh + d] += a * dr[h * dh + d];
        }
        datt(e, h) = acc;
      }
    }
  }

  // Softmax backward per destination/head, then leaky slope.
  Tensor<T> draw(m, heads);
  for (int i = 0; i < n; ++i) {
    int begin = topo.in.offsets[i], end = topo.in.offsets[i + 1];
    if (begin == end) continue;
    for (int h = 0; h < heads; ++h) {
      T s = T(0);
      for (int k = begin; k < end; ++k) {
        int e = topo.in.edge_ids[k];
        s += cache.att(e, h) * datt(e, h);
      }
      for (int k = begin; k < end; ++k) {
        int e = topo.in.edge_ids[k];
        T dl = cache.att(e, h) * (datt(e, h) - s);
        draw(e, h) = dl * (cache.raw(e, h) > T(0) ? T(1) : T(kGatLeakySlope));
      }
    }
  }

  // Scatter logit gradients to the linear terms.
  Tensor<T> ds_src(n, heads), ds_dst(n, heads);
  for (int i = 0; i < n; ++i) {
    for (int k = topo.out.offsets[i]; k < topo.out.offsets[i + 1]; ++k) {
      int e = topo.out.edge_ids[k];
      for (int h = 0; h < heads; ++h) ds_src(i, h) += draw(e, h);
    }
    for (int k = topo.in.offsets[i]; k < topo.in.offsets[i + 1]; ++k) {
      int e = topo.in.edge_ids[k];
      for (int h = 0; h < heads; ++h) ds_dst(i, h) += draw(e, h);
    }
  }
  for (int i = 0; i < n; ++i) {
    const T* zr = cache.z.row(i);
    T* dzr = dz.row(i);
    for (int h = 0; h < heads; ++h) {
      for (int d = 0; d < dh; ++d) {
        grads.a_src(h, d) += ds_src(i, h) * zr[h * dh + d];
        grads.a_dst(h, d) += ds_dst(i, h) * zr[h * dh + d];
        dzr[h * dh + d] += ds_src(i, h) * p.a_src(h, d) + ds_dst(i, h) * p.a_dst(h, d);
      }
    }
  }

  // Edge-projection gradients.
  const int de = cache.pe.cols();
  Tensor<T> dpe(m, de);
  for (int e = 0; e < m; ++e) {
    const T* per = cache.pe.row(e);
    T* dper = dpe.row(e);
    for (int h = 0; h < heads; ++h) {
      T g = draw(e, h);
      for (int d = 0; d < de; ++d) {
        dper[d] += g * p.a_edge(h, d);
        grads.a_edge(h, d) += g * per[d];
      }
    }
  }
  matmul_tn_acc(e_lat, dpe, grads.pe.w);
  for (int e = 0; e < m; ++e)
    for (int d = 0; d < de; ++d) grads.pe.b(0, d) += dpe(e, d);
  de_lat += matmul_nt(dpe, p.pe.w);

  matmul_tn_acc(cache.x, dz, grads.w);
  return matmul_nt(dz, p.w);
}

// ---------------------------------------------------------------------------
// GINE: rectified source-plus-edge messages, sum aggregation, MLP update with
// a learnable self-weight epsilon.
// ---------------------------------------------------------------------------

template <typename T = double>
struct GineParams {
  AffineP<T> pe;   // N -> gw
  Tensor<T> eps;   // 1 x 1, init 0
  MlpP<T> mlp;     // gw -> hidden -> hidden -> gw, LayerNorm output

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    pe.visit(prefix + ".pe", f);
    f(prefix + ".eps", eps);
    mlp.visit(prefix + ".mlp", f);
  }
};

template <typename T = double>
struct GineCache {
  Tensor<T> x;    // n x gw
  Tensor<T> msg;  // m x gw, post-relu
  MlpCache<T> mlp;
  int tensor_count() const { return 2 + mlp.tensor_count(); }
};

template <typename T>
Tensor<T> gine_forward(const GineParams<T>& p, const GraphTopo& topo, const Tensor<T>& x,
                       const Tensor<T>& e_lat, GineCache<T>* cache) {
  const int n = x.rows();
  const int gw = x.cols();
  const int m = static_cast<int>(topo.edges.size());

  Tensor<T> pe = affine_forward(p.pe, e_lat);
  Tensor<T> msg(m, gw);
  for (int e = 0; e < m; ++e) {
    const T* xr = x.row(topo.edges[e].src);
    const T* per = pe.row(e);
    T* mr = msg.row(e);
    for (int j = 0; j < gw; ++j) {
      T v = xr[j] + per[j];
      mr[j] = v > T(0) ? v : T(0);
    }
  }

  Tensor<T> up(n, gw);
  const T self_w = T(1) + p.eps(0, 0);
  for (int i = 0; i < n; ++i) {
    T* ur = up.row(i);
    const T* xr = x.row(i);
    for (int j = 0; j < gw; ++j) ur[j] = self_w * xr[j];
    for (int k = topo.in.offsets[i]; k < topo.in.offsets[i + 1]; ++k) {
      const T* mr = msg.row(topo.in.edge_ids[k]);
      for (int j = 0; j < gw; ++j) ur[j] += mr[j];
    }
  }

  Tensor<T> y = mlp_forward(p.mlp, up, cache ? &cache->mlp : nullptr);
  if (cache) {
    cache->x = x;
    cache->msg = std::move(msg);
  }
  return y;
}

template <typename T>
Tensor<T> gine_backward(const GineParams<T>& p, const GineCache<T>& cache, const GraphTopo& topo,
                        const Tensor<T>& e_lat, const Tensor<T>& dy, GineParams<T>& grads,
                        Tensor<T>& de_lat) {
  const int n = cache.x.rows();
  const int gw = cache.x.cols();
  const int m = static_cast<int>(topo.edges.size());

  Tensor<T> dup = mlp_backward(p.mlp, cache.mlp, dy, grads.mlp);

  T deps = T(0);
  for (int i = 0; i < n; ++i) {
    const T* xr = cache.x.row(i);
    const T* dr = dup.row(i);
    for (int j = 0; j < gw; ++j) deps += dr[j] * xr[j];
  }
  grads.eps(0, 0) += deps;

  const T self_w = T(1) + p.eps(0, 0);
  Tensor<T> dx(n, gw);
  for (int i = 0; i < n; ++i) {
    const T* dr = dup.row(i);
    T* dxr = dx.row(i);
    for (int j = 0; j < gw; ++j) dxr[j] = self_w * dr[j];
  }

  // Message gradients: gather from destinations, mask the rectifier.
  Tensor<T> dmsg(m, gw);
  for (int e = 0; e < m; ++e) {
    const T* dr = dup.row(topo.edges[e].dst);
    const T* mr = cache.msg.row(e);
    T* dmr = dmsg.row(e);
    for (int j = 0; j < gw; ++j) dmr[j] = mr[j] > T(0) ? dr[j] : T(0);
  }

  // Source scatter in fixed per-source order.
  for (int i = 0; i < n; ++i) {
    T* dxr = dx.row(i);
    for (int k = topo.out.offsets[i]; k < topo.out.offsets[i + 1]; ++k) {
      const T* dmr = dmsg.row(topo.out.edge_ids[k]);
      for (int j = 0; j < gw; ++j) dxr[j] += dmr[j];
    }
  }

  matmul_tn_acc(e_lat, dmsg, grads.pe.w);
  for (int e = 0; e < m; ++e)
    for (int j = 0; j < gw; ++j) grads.pe.b(0, j) += dmsg(e, j);
  de_lat += matmul_nt(dmsg, p.pe.w);
  return dx;
}

// ---------------------------------------------------------------------------
// GEN: rectified messages with a small positive offset, per-channel softmax
// aggregation with learnable inverse temperature, MLP update on the
// concatenation (x, aggregate).
// ---------------------------------------------------------------------------

template <typename T = double>
struct GenParams {
  AffineP<T> pe;        // N -> gw
  Tensor<T> inv_temp;   // 1 x 1, init 1
  MlpP<T> mlp;          // 2*gw -> hidden -> hidden -> gw, LayerNorm output

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    pe.visit(prefix + ".pe", f);
    f(prefix + ".inv_temp", inv_temp);
    mlp.visit(prefix + ".mlp", f);
  }
};

template <typename T = double>
struct GenCache {
  Tensor<T> msg;   // m x gw, rectified + offset
  Tensor<T> mask;  // m x gw, rectifier mask
  Tensor<T> wgt;   // m x gw, softmax weights
  MlpCache<T> mlp;
  int tensor_count() const { return 3 + mlp.tensor_count(); }
};

template <typename T>
Tensor<T> gen_forward(const GenParams<T>& p, const GraphTopo& topo, const Tensor<T>& x,
                      const Tensor<T>& e_lat, GenCache<T>* cache) {
  const int n = x.rows();
  const int gw = x.cols();
  const int m = static_cast<int>(topo.edges.size());
  const T t = p.inv_temp(0, 0);

  Tensor<T> pe = affine_forward(p.pe, e_lat);
  Tensor<T> msg(m, gw), mask(m, gw);
  for (int e = 0; e < m; ++e) {
    const T* xr = x.row(topo.edges[e].src);
    const T* per = pe.row(e);
    T* mr = msg.row(e);
    T* kr = mask.row(e);
    for (int j = 0; j < gw; ++j) {
      T v = xr[j] + per[j];
      kr[j] = v > T(0) ? T(1) : T(0);
      mr[j] = (v > T(0) ? v : T(0)) + T(kGenMessageEps);
    }
  }

  // Per-destination, per-channel softmax aggregation.
  Tensor<T> wgt(m, gw);
  Tensor<T> agg(n, gw);
  for (int i = 0; i < n; ++i) {
    int begin = topo.in.offsets[i], end = topo.in.offsets[i + 1];
    if (begin == end) continue;
    T* ar = agg.row(i);
    for (int j = 0; j < gw; ++j) {
      T mx = -std::numeric_limits<T>::infinity();
      for (int k = begin; k < end; ++k) {
        T v = t * msg(topo.in.edge_ids[k], j);
        if (v > mx) mx = v;
      }
      T denom = T(0);
      for (int k = begin; k < end; ++k) {
        int e = topo.in.edge_ids[k];
        T ex = std::exp(t * msg(e, j) - mx);
        wgt(e, j) = ex;
        denom += ex;
      }
      T acc = T(0);
      for (int k = begin; k < end; ++k) {
        int e = topo.in.edge_ids[k];
        wgt(e, j) /= denom;
        acc += wgt(e, j) * msg(e, j);
      }
      ar[j] = acc;
    }
  }

  Tensor<T> up(n, 2 * gw);
  for (int i = 0; i < n; ++i) {
    std::copy(x.row(i), x.row(i) + gw, up.row(i));
    std::copy(agg.row(i), agg.row(i) + gw, up.row(i) + gw);
  }

  Tensor<T> y = mlp_forward(p.mlp, up, cache ? &cache->mlp : nullptr);
  if (cache) {
    cache->msg = std::move(msg);
    cache->mask = std::move(mask);
    cache->wgt = std::move(wgt);
  }
  return y;
}

template <typename T>
Tensor<T> gen_backward(const GenParams<T>& p, const GenCache<T>& cache, const GraphTopo& topo,
                       const Tensor<T>& e_lat, const Tensor<T>& dy, GenParams<T>& grads,
                       Tensor<T>& de_lat) {
  const int gw = dy.cols();
  const int n = dy.rows();
  const int m = static_cast<int>(topo.edges.size());
  const T t = p.inv_temp(0, 0);

  Tensor<T> dup = mlp_backward(p.mlp, cache.mlp, dy, grads.mlp);
  const Tensor<T>& up = cache.mlp.x;  // (x | agg)

  Tensor<T> dx(n, gw);
  for (int i = 0; i < n; ++i) std::copy(dup.row(i), dup.row(i) + gw, dx.row(i));

  // Softmax-aggregation backward: for channel j of destination i with weights
  // w_e and messages m_e, d m_e = d agg * w_e * (1 + t (m_e - agg)) and
  // d t += d agg * sum_e w_e m_e (m_e - agg).
  Tensor<T> dmsg(m, gw);
  T dt = T(0);
  for (int i = 0; i < n; ++i) {
    int begin = topo.in.offsets[i], end = topo.in.offsets[i + 1];
    if (begin == end) continue;
    const T* dar = dup.row(i) + gw;
    const T* aggr = up.row(i) + gw;
    for (int j = 0; j < gw; ++j) {
      T da = dar[j];
      T agg = aggr[j];
      T tsum = T(0);
      for (int k = begin; k < end; ++k) {
        int e = topo.in.edge_ids[k];
        T me = cache.msg(e, j);
        T we = cache.wgt(e, j);
        dmsg(e, j) = da * we * (T(1) + t * (me - agg));
        tsum += we * me * (me - agg);
      }
      dt += da * tsum;
    }
  }
  grads.inv_temp(0, 0) += dt;

  // Rectifier mask, then scatter to sources and edge projection.
  for (int e = 0; e < m; ++e) {
    T* dmr = dmsg.row(e);
    const T* kr = cache.mask.row(e);
    for (int j = 0; j < gw; ++j) dmr[j] *= kr[j];
  }
  for (int i = 0; i < n; ++i) {
    T* dxr = dx.row(i);
    for (int k = topo.out.offsets[i]; k < topo.out.offsets[i + 1]; ++k) {
      const T* dmr = dmsg.row(topo.out.edge_ids[k]);
      for (int j = 0; j < gw; ++j) dxr[j] += dmr[j];
    }
  }
  matmul_tn_acc(e_lat, dmsg, grads.pe.w);
  for (int e = 0; e < m; ++e)
    for (int j = 0; j < gw; ++j) grads.pe.b(0, j) += dmsg(e, j);
  de_lat += matmul_nt(dmsg, p.pe.w);
  return dx;
}

// ---------------------------------------------------------------------------
// Uniform kernel interface
// ---------------------------------------------------------------------------

template <typename T = double>
using KernelParams = std::variant<GatParams<T>, GineParams<T>, GenParams<T>>;

template <typename T = double>
using KernelCache = std::variant<GatCache<T>, GineCache<T>, GenCache<T>>;

/// Allocates and seeds one kernel instance for latent width N and group width gw.
template <typename T>
KernelParams<T> make_kernel(const LayerConfig& cfg, int latent_width, int group_width, Rng& rng) {
  switch (cfg.kind) {
    case LayerKind::GAT: {
      GatParams<T> p;
      if (group_width % cfg.heads != 0) throw ConfigError("gat: heads must divide group width");
      int de = cfg.gat_edge_dim(group_width);
      int dh = group_width / cfg.heads;
      p.w = Tensor<T>(group_width, group_width);
      p.a_src = Tensor<T>(cfg.heads, dh);
      p.a_dst = Tensor<T>(cfg.heads, dh);
      p.pe.resize(latent_width, de);
      p.a_edge = Tensor<T>(cfg.heads, de);
      p.bias = Tensor<T>(1, group_width);
      p.ln.resize(group_width);
      double wl = std::sqrt(6.0 / group_width);
      for (size_t i = 0; i < p.w.size(); ++i) p.w.data()[i] = static_cast<T>(rng.uniform(-wl, wl));
      double al = std::sqrt(6.0 / dh);
      for (size_t i = 0; i < p.a_src.size(); ++i) p.a_src.data()[i] = static_cast<T>(rng.uniform(-al, al));
      for (size_t i = 0; i < p.a_dst.size(); ++i) p.a_dst.data()[i] = static_cast<T>(rng.uniform(-al, al));
      init_affine(p.pe, rng);
      double el = std::sqrt(6.0 / de);
      for (size_t i = 0; i < p.a_edge.size(); ++i) p.a_edge.data()[i] = static_cast<T>(rng.uniform(-el, el));
      init_layer_norm(p.ln);
      return p;
    }
    case LayerKind::GINE: {
      GineParams<T> p;
      p.pe.resize(latent_width, group_width);
      init_affine(p.pe, rng);
      p.eps = Tensor<T>(1, 1);
      p.mlp.resize({group_width, cfg.gine_hidden, group_width, true});
      init_mlp(p.mlp, rng);
      return p;
    }
    case LayerKind::GEN: {
      GenParams<T> p;
      p.pe.resize(latent_width, group_width);
      init_affine(p.pe, rng);
      p.inv_temp = Tensor<T>(1, 1);
      p.inv_temp(0, 0) = T(1);
      p.mlp.resize({2 * group_width, cfg.gen_hidden, group_width, true});
      init_mlp(p.mlp, rng);
      return p;
    }
  }
  throw ConfigError("unreachable");
}

template <typename T>
Tensor<T> kernel_forward(const KernelParams<T>& p, const GraphTopo& topo, const Tensor<T>& x,
                         const Tensor<T>& e_lat, KernelCache<T>* cache) {
  ++kernel_eval_count();
  if (const auto* g = std::get_if<GatParams<T>>(&p)) {
    if (!cache) return gat_forward(*g, topo, x, e_lat, static_cast<GatCache<T>*>(nullptr));
    *cache = GatCache<T>{};
    return gat_forward(*g, topo, x, e_lat, &std::get<GatCache<T>>(*cache));
  }
  if (const auto* g = std::get_if<GineParams<T>>(&p)) {
    if (!cache) return gine_forward(*g, topo, x, e_lat, static_cast<GineCache<T>*>(nullptr));
    *cache = GineCache<T>{};
    return gine_forward(*g, topo, x, e_lat, &std::get<GineCache<T>>(*cache));
  }
  const auto& g = std::get<GenParams<T>>(p);
  if (!cache) return gen_forward(g, topo, x, e_lat, static_cast<GenCache<T>*>(nullptr));
  *cache = GenCache<T>{};
  return gen_forward(g, topo, x, e_lat, &std::get<GenCache<T>>(*cache));
}

template <typename T>
Tensor<T> kernel_backward(const KernelParams<T>& p, const KernelCache<T>& cache,
                          const GraphTopo& topo, const Tensor<T>& e_lat, const Tensor<T>& dy,
                          KernelParams<T>& grads, Tensor<T>& de_lat) {
  if (const auto* g = std::get_if<GatParams<T>>(&p))
    return gat_backward(*g, std::get<GatCache<T>>(cache), topo, e_lat, dy,
                        std::get<GatParams<T>>(grads), de_lat);
  if (const auto* g = std::get_if<GineParams<T>>(&p))
    return gine_backward(*g, std::get<GineCache<T>>(cache), topo, e_lat, dy,
                         std::get<GineParams<T>>(grads), de_lat);
  return gen_backward(std::get<GenParams<T>>(p), std::get<GenCache<T>>(cache), topo, e_lat, dy,
                      std::get<GenParams<T>>(grads), de_lat);
}

template <typename T>
int cache_tensor_count(const KernelCache<T>& c) {
  return std::visit([](const auto& cc) { return cc.tensor_count(); }, c);
}

template <typename T, typename F>
void visit_kernel(KernelParams<T>& p, const std::string& prefix, F&& f) {
  std::visit([&](auto& pp) { pp.visit(prefix, f); }, p);
}

/// Zero-valued clone with identical shapes; used for gradient accumulators.
template <typename T>
KernelParams<T> zero_like(const KernelParams<T>& p) {
  KernelParams<T> g = p;
  visit_kernel(g, "", [](const std::string&, Tensor<T>& t) { t.set_zero(); });
  return g;
}

// ---------------------------------------------------------------------------
// Parameter counting
// ---------------------------------------------------------------------------

/// Closed-form trainable scalar count of one kernel f_wk.
inline long count_params(const LayerConfig& cfg, int latent_width, int group_width) {
  const long N = latent_width, gw = group_width;
  switch (cfg.kind) {
    case LayerKind::GAT: {
      long de = cfg.gat_edge_dim(group_width);
      long dh = gw / cfg.heads;
      return gw * gw + 2 * cfg.heads * dh + (N * de + de) + cfg.heads * de + gw + 2 * gw;
    }
    case LayerKind::GINE: {
      long h = cfg.gine_hidden;
      long mlp = (gw * h + h) + (h * h + h) + (h * gw + gw) + 2 * gw;
      return (N * gw + gw) + 1 + mlp;
    }
    case LayerKind::GEN: {
      long h = cfg.gen_hidden;
      long mlp = (2 * gw * h + h) + (h * h + h) + (h * gw + gw) + 2 * gw;
      return (N * gw + gw) + 1 + mlp;
    }
  }
  return 0;
}

}  // namespace gale
