#pragma once

#include <limits>

#include "gale/graph.hpp"
#include "gale/mesh_graph.hpp"
#include "gale/nn.hpp"
#include "gale/potential_flow.hpp"
#include "gale/processor.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Input-context estimation (Bernoulli farfield speed + normal-force sum)
// ---------------------------------------------------------------------------

struct InputContext {
  double u_hat_inf{0.0};  // m/s
  double c_hat_n{0.0};    // dimensionless
};

struct OutputContext {
  double u_inf_pred{0.0};
  double alpha_pred_deg{0.0};
  double ti_pred{0.0};
};

/// Stagnation-based farfield estimate: p0 is the largest known surface
/// pressure, u_hat = sqrt(2 p0 / rho); c_hat_n sums p*l*n_y over the wall,
/// normalized by p0.  Wall boundary lengths and outward normals come from the
/// wall-to-cell edge geometry.
inline InputContext estimate_context(const FlowGraph& g, const PhysicalConstants& consts = {}) {
  const int p = g.meta.wall_count;
  if (p < 1) throw DataError("estimate_context needs at least one wall node");
  double p0 = -std::numeric_limits<double>::infinity();
  for (int w = 0; w < p; ++w) {
    if (!g.pressure_valid[w]) throw DataError("wall node without valid pressure");
    p0 = std::max(p0, g.pressure_in[w]);
  }
  if (!(p0 > 0.0))
    throw DataError("no positive stagnation pressure among the wall nodes (p0 = " + format_g17(p0) +
                    ")");
  std::vector<WallGeom> wg = wall_geometry(g);
  double cn = 0.0;
  for (int w = 0; w < p; ++w) cn += g.pressure_in[w] * wg[w].face_len * wg[w].outward_normal.y;
  InputContext ctx;
  ctx.u_hat_inf = std::sqrt(2.0 * p0 / consts.rho);
  ctx.c_hat_n = cn / p0;
  return ctx;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct NormStats {
  double p_mean{0.0};  // Pa, over known wall pressures
  double p_std{1.0};   // Pa
  double u_scale{1.0};  // m/s, the estimated farfield speed
};

constexpr double kAlphaNormDeg = 15.0;  // sampling half-range

inline NormStats compute_norm_stats(const FlowGraph& g, const InputContext& ctx) {
  const int p = g.meta.wall_count;
  if (p < 1) throw DataError("normalization needs wall pressures");
  double mean = 0.0;
  for (int w = 0; w < p; ++w) mean += g.pressure_in[w];
  mean /= p;
  double var = 0.0;
  for (int w = 0; w < p; ++w) {
    double d = g.pressure_in[w] - mean;
    var += d * d;
  }
  var /= p;
  NormStats s;
  s.p_mean = mean;
  s.p_std = std::sqrt(var);
  if (!(s.p_std > 0.0)) throw DataError("degenerate constant surface pressure distribution");
  s.u_scale = ctx.u_hat_inf;
  return s;
}

// ---------------------------------------------------------------------------
// Feature propagation: x <- A_hat x with known (wall) entries re-clamped each
// iteration, A_hat the symmetrically normalized adjacency without self-loops.
// ---------------------------------------------------------------------------

struct FpResult {
  std::vector<double> values;     // normalized pressure channel, one per node
  std::vector<int> isolated;      // degree-0 nodes, left at zero
};

inline FpResult feature_propagate(const FlowGraph& g, int iters, const NormStats& stats) {
  if (iters < 1) throw ConfigError("feature propagation needs at least one iteration");
  const int n = g.num_nodes();
  std::vector<double> degree(n, 0.0);
  for (const Edge& e : g.edges) degree[e.dst] += 1.0;

  FpResult res;
  res.values.assign(n, 0.0);
  std::vector<char> known(n, 0);
  for (int i = 0; i < n; ++i) {
    if (g.pressure_valid[i]) {
      known[i] = 1;
      res.values[i] = (g.pressure_in[i] - stats.p_mean) / stats.p_std;
    }
    if (degree[i] == 0.0) res.isolated.push_back(i);
  }

  std::vector<double> inv_sqrt_deg(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (degree[i] > 0.0) inv_sqrt_deg[i] = 1.0 / std::sqrt(degree[i]);

  std::vector<double> next(n, 0.0);
  for (int it = 0; it < iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const Edge& e : g.edges)
      next[e.dst] += res.values[e.src] * inv_sqrt_deg[e.src] * inv_sqrt_deg[e.dst];
    for (int i = 0; i < n; ++i) {
      if (known[i])
        next[i] = res.values[i];  // exact clamp
    }
    res.values.swap(next);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Model configuration and parameters
// ---------------------------------------------------------------------------

struct ModelConfig {
  ProcessorConfig proc;       // kind, N, L, C and kernel hyperparameters
  int fp_iterations{20};
  bool use_context{true};     // ablation flag: zero the estimated context inputs
  bool loss_all_nodes{true};  // false restricts the node loss to fluid nodes

  int latent() const { return proc.latent; }
  void check() const {
    proc.check();
    if (fp_iterations < 1) throw ConfigError("fp_iterations must be at least 1");
  }
};

constexpr int kNodeInputDim = 4;   // propagated pressure + one-hot type
constexpr int kEdgeInputDim = 4;   // dir_x, dir_y, edge_len, boundary_len
constexpr int kCtxInputDim = 2;    // (u_hat/u_scale, c_hat_n)
constexpr int kNodeOutputDim = 3;  // p, ux, uy
constexpr int kGlobalOutputDim = 3;

struct ModelParams {
  ModelConfig config;
  MlpP<double> enc_node, enc_edge, enc_global;
  MlpP<double> dec_node, dec_global;
  ProcessorParams<double> proc;

  template <typename F>
  void visit(F&& f) {
    enc_node.visit("enc.node", f);
    enc_edge.visit("enc.edge", f);
    enc_global.visit("enc.global", f);
    dec_node.visit("dec.node", f);
    dec_global.visit("dec.global", f);
    proc.visit(f);
  }

  ModelParams zero_clone() const {
    ModelParams z = *this;
    z.visit([](const std::string&, Tensor<double>& t) { t.set_zero(); });
    return z;
  }
};

inline ModelParams make_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.check();
  const int n = cfg.latent();
  ModelParams m;
  m.config = cfg;
  Rng rng(mix64(seed));
  m.enc_node.resize({kNodeInputDim + n, n, n, true});
  init_mlp(m.enc_node, rng);
  m.enc_edge.resize({kEdgeInputDim, n, n, true});
  init_mlp(m.enc_edge, rng);
  m.enc_global.resize({kCtxInputDim, n, n, true});
  init_mlp(m.enc_global, rng);
  m.dec_node.resize({n, n, kNodeOutputDim, false});
  init_mlp(m.dec_node, rng);
  m.dec_global.resize({n, n, kGlobalOutputDim, false});
  init_mlp(m.dec_global, rng);
  m.proc = make_processor<double>(cfg.proc, rng);
  return m;
}

inline ParamRegistry make_registry(ModelParams& params, ModelParams& grads) {
  ParamRegistry reg;
  params.visit([&reg](const std::string& n, Tensor<double>& t) { reg.push_back({n, &t, nullptr}); });
  size_t i = 0;
  grads.visit([&reg, &i](const std::string&, Tensor<double>& t) { reg[i++].grad = &t; });
  return reg;
}

// ---------------------------------------------------------------------------
// Case preparation: everything parameter-independent, computed once.
// ---------------------------------------------------------------------------

struct PreparedCase {
  FlowGraph g;
  GraphTopo topo;
  InputContext ctx;
  NormStats stats;
  Tensor<double> node_in;        // n x 4
  Tensor<double> edge_in;        // m x 4
  Tensor<double> ctx_in;         // 1 x 2
  Tensor<double> target_node;    // n x 3, normalized
  Tensor<double> target_global;  // 1 x 3, normalized
};

inline PreparedCase prepare_case(FlowGraph graph, const PhysicalConstants& consts, int fp_iters) {
  PreparedCase pc;
  pc.g = std::move(graph);
  pc.ctx = estimate_context(pc.g, consts);
  pc.stats = compute_norm_stats(pc.g, pc.ctx);
  pc.topo = GraphTopo::build(pc.g.num_nodes(), pc.g.edges);

  FpResult fp = feature_propagate(pc.g, fp_iters, pc.stats);

  const int n = pc.g.num_nodes();
  pc.node_in = Tensor<double>(n, kNodeInputDim);
  for (int i = 0; i < n; ++i) {
    double oh[3];
    one_hot(pc.g.node_type[i], oh);
    pc.node_in(i, 0) = fp.values[i];
    pc.node_in(i, 1) = oh[0];
    pc.node_in(i, 2) = oh[1];
    pc.node_in(i, 3) = oh[2];
  }

  const int m = pc.g.num_edges();
  pc.edge_in = Tensor<double>(m, kEdgeInputDim);
  for (int e = 0; e < m; ++e) {
    const EdgeFeature& f = pc.g.edge_feat[e];
    pc.edge_in(e, 0) = f.dir_x;
    pc.edge_in(e, 1) = f.dir_y;
    pc.edge_in(e, 2) = f.length;
    pc.edge_in(e, 3) = f.boundary_len;
  }

  pc.ctx_in = Tensor<double>(1, kCtxInputDim);
  pc.ctx_in(0, 0) = pc.ctx.u_hat_inf / pc.stats.u_scale;  // unity by construction
  pc.ctx_in(0, 1) = pc.ctx.c_hat_n;

  pc.target_node = Tensor<double>(n, kNodeOutputDim);
  for (int i = 0; i < n; ++i) {
    pc.target_node(i, 0) = (pc.g.target_p[i] - pc.stats.p_mean) / pc.stats.p_std;
    pc.target_node(i, 1) = pc.g.target_ux[i] / pc.stats.u_scale;
    pc.target_node(i, 2) = pc.g.target_uy[i] / pc.stats.u_scale;
  }
  pc.target_global = Tensor<double>(1, kGlobalOutputDim);
  pc.target_global(0, 0) = pc.g.global_true.u_inf / pc.stats.u_scale;
  pc.target_global(0, 1) = pc.g.global_true.alpha_deg / kAlphaNormDeg;
  pc.target_global(0, 2) = pc.g.global_true.ti;
  return pc;
}

// ---------------------------------------------------------------------------
// Forward / backward through Encode - Process - Decode
// ---------------------------------------------------------------------------

struct ModelOutput {
  Tensor<double> node;    // n x 3, normalized
  Tensor<double> global;  // 1 x 3, normalized
};

struct ForwardArtifacts {
  MlpCache<double> enc_node_c, enc_edge_c, enc_global_c, dec_node_c, dec_global_c;
  Tensor<double> e_lat;         // m x N
  Tensor<double> latent_final;  // n x N
};

inline ModelOutput model_forward(const ModelParams& params, const PreparedCase& pc,
                                 ForwardArtifacts* art) {
  const int n = pc.g.num_nodes();
  const int N = params.config.latent();

  Tensor<double> ctx_row = pc.ctx_in;
  if (!params.config.use_context) ctx_row.set_zero();

  Tensor<double> glob_lat =
      mlp_forward(params.enc_global, ctx_row, art ? &art->enc_global_c : nullptr);
  Tensor<double> e_lat = mlp_forward(params.enc_edge, pc.edge_in, art ? &art->enc_edge_c : nullptr);

  // Node encoder consumes the node features concatenated with the global
  // latent, so graph-level attributes reach every node latent.
  Tensor<double> node_full(n, kNodeInputDim + N);
  for (int i = 0; i < n; ++i) {
    std::copy(pc.node_in.row(i), pc.node_in.row(i) + kNodeInputDim, node_full.row(i));
    std::copy(glob_lat.row(0), glob_lat.row(0) + N, node_full.row(i) + kNodeInputDim);
  }
  Tensor<double> lat0 = mlp_forward(params.enc_node, node_full, art ? &art->enc_node_c : nullptr);

  Tensor<double> lat_final = rev_forward(params.proc, pc.topo, e_lat, lat0);

  ModelOutput out;
  out.node = mlp_forward(params.dec_node, lat_final, art ? &art->dec_node_c : nullptr);
  out.global = mlp_forward(params.dec_global, glob_lat, art ? &art->dec_global_c : nullptr);
  if (art) {
    art->e_lat = std::move(e_lat);
    art->latent_final = std::move(lat_final);
  }
  return out;
}

/// Accumulates gradients for the whole model given output-side gradients.
inline void model_backward(const ModelParams& params, const PreparedCase& pc,
                           const ForwardArtifacts& art, const Tensor<double>& dnode,
                           const Tensor<double>& dglobal, ModelParams& grads) {
  const int N = params.config.latent();

  Tensor<double> dlat_final = mlp_backward(params.dec_node, art.dec_node_c, dnode, grads.dec_node);
  Tensor<double> dglob_lat =
      mlp_backward(params.dec_global, art.dec_global_c, dglobal, grads.dec_global);

  ProcessorBackwardResult<double> pb =
      rev_backward(params.proc, pc.topo, art.e_lat, art.latent_final, dlat_final, grads.proc);

  Tensor<double> dnode_full =
      mlp_backward(params.enc_node, art.enc_node_c, pb.dv_in, grads.enc_node);
  for (int i = 0; i < dnode_full.rows(); ++i) {
    const double* row = dnode_full.row(i) + kNodeInputDim;
    for (int j = 0; j < N; ++j) dglob_lat(0, j) += row[j];
  }

  mlp_backward(params.enc_edge, art.enc_edge_c, pb.de_lat, grads.enc_edge);
  mlp_backward(params.enc_global, art.enc_global_c, dglob_lat, grads.enc_global);
}

// ---------------------------------------------------------------------------
// Loss (normalized space): node MSE + lambda * global MSE
// ---------------------------------------------------------------------------

struct LossTerms {
  double node{0.0};
  double global{0.0};
  double total{0.0};
};

/// When dnode/dglobal are non-null they receive d(total)/d(prediction).
inline LossTerms compute_loss(const ModelOutput& out, const PreparedCase& pc, double lambda,
                              bool all_nodes, Tensor<double>* dnode = nullptr,
                              Tensor<double>* dglobal = nullptr) {
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  const int n = out.node.rows();
  long selected = 0;
  LossTerms lt;
  if (dnode) *dnode = Tensor<double>(n, kNodeOutputDim);
  for (int i = 0; i < n; ++i) {
    if (!all_nodes && pc.g.node_type[i] != NodeType::Fluid) continue;
    ++selected;
    for (int c = 0; c < kNodeOutputDim; ++c) {
      double d = out.node(i, c) - pc.target_node(i, c);
      lt.node += d * d;
    }
  }
  if (selected == 0) throw DataError("node loss selected no nodes");
  double node_denom = static_cast<double>(selected) * kNodeOutputDim;
  lt.node /= node_denom;
  if (dnode) {
    for (int i = 0; i < n; ++i) {
      if (!all_nodes && pc.g.node_type[i] != NodeType::Fluid) continue;
      for (int c = 0; c < kNodeOutputDim; ++c)
        (*dnode)(i, c) = 2.0 * (out.node(i, c) - pc.target_node(i, c)) / node_denom;
    }
  }

  for (int c = 0; c < kGlobalOutputDim; ++c) {
    double d = out.global(0, c) - pc.target_global(0, c);
    lt.global += d * d;
  }
  lt.global /= kGlobalOutputDim;
  if (dglobal) {
    *dglobal = Tensor<double>(1, kGlobalOutputDim);
    for (int c = 0; c < kGlobalOutputDim; ++c)
      (*dglobal)(0, c) = lambda * 2.0 * (out.global(0, c) - pc.target_global(0, c)) / kGlobalOutputDim;
  }

  lt.total = lt.node + lambda * lt.global;
  return lt;
}

// ---------------------------------------------------------------------------
// Reconstruction (full pipeline, denormalized outputs)
// ---------------------------------------------------------------------------

struct Reconstruction {
  std::vector<double> p, ux, uy;  // physical units, one per node
  OutputContext ctx;
  ModelOutput normalized;
  InputContext input_ctx;
  NormStats stats;
};

inline Reconstruction reconstruct_prepared(const ModelParams& params, const PreparedCase& pc) {
  ModelOutput out = model_forward(params, pc, nullptr);
  Reconstruction rec;
  const int n = pc.g.num_nodes();
  rec.p.resize(n);
  rec.ux.resize(n);
  rec.uy.resize(n);
  for (int i = 0; i < n; ++i) {
    rec.p[i] = out.node(i, 0) * pc.stats.p_std + pc.stats.p_mean;
    rec.ux[i] = out.node(i, 1) * pc.stats.u_scale;
    rec.uy[i] = out.node(i, 2) * pc.stats.u_scale;
  }
  rec.ctx.u_inf_pred = out.global(0, 0) * pc.stats.u_scale;
  rec.ctx.alpha_pred_deg = out.global(0, 1) * kAlphaNormDeg;
  rec.ctx.ti_pred = out.global(0, 2);
  rec.normalized = std::move(out);
  rec.input_ctx = pc.ctx;
  rec.stats = pc.stats;
  return rec;
}

inline Reconstruction reconstruct(const FlowGraph& g, const ModelParams& params,
                                  const PhysicalConstants& consts = {}) {
  PreparedCase pc = prepare_case(g, consts, params.config.fp_iterations);
  Reconstruction rec = reconstruct_prepared(params, pc);
  for (double v : rec.p)
    if (!std::isfinite(v)) throw NumericError("non-finite reconstructed pressure");
  return rec;
}

// ---------------------------------------------------------------------------
// Training loop: batch size one, epoch-wise shuffling, Adam with exponential
// learning-rate decay, best-validation checkpoint selection.
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lambda{1.0};
  double base_lr{5e-4};
  double decay{0.97};
  int epochs{1};
  uint64_t seed{0};
  int fp_iterations{20};
  bool loss_all_nodes{true};

  void check() const {
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (epochs < 1) throw ConfigError("need at least one epoch");
    if (fp_iterations < 1) throw ConfigError("fp_iterations must be at least 1");
  }
};

struct TraceRow {
  long step;
  int epoch;
  double lr;
  double node_loss;
  double global_loss;
  double total;
};

struct TrainResult {
  ModelParams params;  // final
  ModelParams best;    // lowest validation loss
  double best_val{std::numeric_limits<double>::infinity()};
  int best_epoch{-1};
  std::vector<TraceRow> trace;
  // Final optimizer state, in registry order.
  std::vector<Tensor<double>> adam_m, adam_v;
  int64_t adam_step{0};
};

inline double validation_loss(const ModelParams& params, const std::vector<PreparedCase>& val,
                              double lambda, bool all_nodes) {
  if (val.empty()) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const PreparedCase& pc : val) {
    ModelOutput out = model_forward(params, pc, nullptr);
    sum += compute_loss(out, pc, lambda, all_nodes).total;
  }
  return sum / static_cast<double>(val.size());
}

inline TrainResult train(const std::vector<FlowGraph>& train_graphs,
                         const std::vector<FlowGraph>& val_graphs, const ModelConfig& mcfg,
                         const TrainConfig& tcfg, const PhysicalConstants& consts = {}) {
  tcfg.check();
  if (train_graphs.empty()) throw DataError("empty training split");

  ModelConfig cfg = mcfg;
  cfg.fp_iterations = tcfg.fp_iterations;
  cfg.loss_all_nodes = tcfg.loss_all_nodes;

  std::vector<PreparedCase> train_prep, val_prep;
  train_prep.reserve(train_graphs.size());
  for (const FlowGraph& g : train_graphs) train_prep.push_back(prepare_case(g, consts, tcfg.fp_iterations));
  for (const FlowGraph& g : val_graphs) val_prep.push_back(prepare_case(g, consts, tcfg.fp_iterations));

  TrainResult res;
  res.params = make_model(cfg, tcfg.seed);
  ModelParams grads = res.params.zero_clone();
  ParamRegistry reg = make_registry(res.params, grads);
  Adam adam(reg);

  Rng shuffle_rng(mix64(tcfg.seed ^ 0x5f0f7e5ULL));
  std::vector<int> order(train_prep.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  long step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    double lr = decayed_lr(tcfg.base_lr, tcfg.decay, epoch);
    shuffle_rng.shuffle(order);
    for (int idx : order) {
      const PreparedCase& pc = train_prep[idx];
      zero_grads(reg);
      ForwardArtifacts art;
      ModelOutput out = model_forward(res.params, pc, &art);
      Tensor<double> dnode, dglobal;
      LossTerms lt = compute_loss(out, pc, tcfg.lambda, tcfg.loss_all_nodes, &dnode, &dglobal);
      if (!std::isfinite(lt.total))
        throw NumericError("non-finite loss on case '" + pc.g.meta.case_id + "' at step " +
                           std::to_string(step));
      model_backward(res.params, pc, art, dnode, dglobal, grads);
      adam.step(reg, lr);
      ++step;
      res.trace.push_back({step, epoch, lr, lt.node, lt.global, lt.total});
    }

    if (!val_prep.empty()) {
      double vloss = validation_loss(res.params, val_prep, tcfg.lambda, tcfg.loss_all_nodes);
      if (vloss < res.best_val) {
        res.best_val = vloss;
        res.best_epoch = epoch;
        res.best = res.params;
      }
    }
  }
  if (val_prep.empty()) res.best = res.params;
  res.adam_m = adam.moments1();
  res.adam_v = adam.moments2();
  res.adam_step = adam.step_count();
  return res;
}

}  // namespace gale
