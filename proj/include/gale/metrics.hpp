#pragma once

#include <filesystem>
#include <fstream>

#include "gale/graph_io.hpp"
#include "gale/mesh_graph.hpp"
#include "gale/pipeline.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Metric suites: per-channel field RMSE over fluid nodes and farfield-triplet
// RMSE, aggregated per case then averaged over the test set; plus the
// concentric elliptical regions around the airfoil.
// ---------------------------------------------------------------------------

struct RegionSpec {
  double a{1.0};  // semi-major axis, chord lengths
  double b{1.0};  // semi-minor axis, chord lengths

  void check() const {
    if (!(a >= b && b > 0.0)) throw ConfigError("region requires a >= b > 0");
  }
};

inline std::vector<RegionSpec> default_regions() {
  return {{0.6, 0.1}, {0.7, 0.15}, {0.8, 0.2}};
}

struct CasePrediction {
  std::vector<double> p, ux, uy;
  OutputContext ctx;
};

inline CasePrediction to_prediction(const Reconstruction& rec) {
  return {rec.p, rec.ux, rec.uy, rec.ctx};
}

struct RegionMetrics {
  RegionSpec spec;
  double rmse_ux{0.0};
  double rmse_uy{0.0};
  long member_nodes{0};       // total fluid members across cases
  int cases_with_members{0};  // cases contributing to the average
};

struct MetricsReport {
  double rmse_p{0.0};
  double rmse_ux{0.0};
  double rmse_uy{0.0};
  double rmse_u_inf{0.0};
  double rmse_alpha{0.0};
  double rmse_ti{0.0};
  int case_count{0};
  std::vector<RegionMetrics> regions;
};

namespace detail {

/// Per-case RMSE of one channel over the selected nodes; the same routine
/// backs the global table and the regional table so a whole-domain region
/// reproduces the global numbers exactly.
inline double masked_rmse(const std::vector<double>& pred, const std::vector<double>& truth,
                          const std::vector<char>& member, long count) {
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!member[i]) continue;
    double d = pred[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(count));
}

inline std::vector<char> fluid_mask(const FlowGraph& g, long& count) {
  std::vector<char> m(g.num_nodes(), 0);
  count = 0;
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (g.node_type[i] == NodeType::Fluid) {
      m[i] = 1;
      ++count;
    }
  }
  return m;
}

}  // namespace detail

/// Field RMSE per channel over fluid nodes (per-case, then averaged over the
/// dataset) plus farfield-triplet errors.  `pooled` switches to pooling all
/// nodes across cases instead of the per-case average.
inline MetricsReport rmse_global(const std::vector<FlowGraph>& graphs,
                                 const std::vector<CasePrediction>& preds, bool pooled = false) {
  if (graphs.size() != preds.size() || graphs.empty())
    throw DataError("metric computation needs one prediction per case");
  MetricsReport rep;
  rep.case_count = static_cast<int>(graphs.size());

  double pool_p = 0.0, pool_ux = 0.0, pool_uy = 0.0;
  long pool_n = 0;
  for (size_t c = 0; c < graphs.size(); ++c) {
    const FlowGraph& g = graphs[c];
    const CasePrediction& pr = preds[c];
    if (pr.p.size() != static_cast<size_t>(g.num_nodes()))
      throw DataError("prediction size mismatch on case '" + g.meta.case_id + "'");
    long nf = 0;
    std::vector<char> mask = detail::fluid_mask(g, nf);
    if (nf == 0) throw DataError("case '" + g.meta.case_id + "' has no fluid nodes");
    if (pooled) {
      for (int i = 0; i < g.num_nodes(); ++i) {
        if (!mask[i]) continue;
        pool_p += (pr.p[i] - g.target_p[i]) * (pr.p[i] - g.target_p[i]);
        pool_ux += (pr.ux[i] - g.target_ux[i]) * (pr.ux[i] - g.target_ux[i]);
        pool_uy += (pr.uy[i] - g.target_uy[i]) * (pr.uy[i] - g.target_uy[i]);
      }
      pool_n += nf;
    } else {
      rep.rmse_p += detail::masked_rmse(pr.p, g.target_p, mask, nf);
      rep.rmse_ux += detail::masked_rmse(pr.ux, g.target_ux, mask, nf);
      rep.rmse_uy += detail::masked_rmse(pr.uy, g.target_uy, mask, nf);
    }
    rep.rmse_u_inf += std::abs(pr.ctx.u_inf_pred - g.global_true.u_inf);
    rep.rmse_alpha += std::abs(pr.ctx.alpha_pred_deg - g.global_true.alpha_deg);
    rep.rmse_ti += std::abs(pr.ctx.ti_pred - g.global_true.ti);
  }
  double nc = static_cast<double>(rep.case_count);
  if (pooled) {
    rep.rmse_p = std::sqrt(pool_p / static_cast<double>(pool_n));
    rep.rmse_ux = std::sqrt(pool_ux / static_cast<double>(pool_n));
    rep.rmse_uy = std::sqrt(pool_uy / static_cast<double>(pool_n));
  } else {
    rep.rmse_p /= nc;
    rep.rmse_ux /= nc;
    rep.rmse_uy /= nc;
  }
  rep.rmse_u_inf /= nc;
  rep.rmse_alpha /= nc;
  rep.rmse_ti /= nc;
  return rep;
}

/// Velocity RMSE restricted to fluid nodes inside each chord-aligned ellipse
/// centered on the chord midpoint.  Cases with no member nodes are excluded
/// from that region's average.
inline std::vector<RegionMetrics> rmse_regions(const std::vector<FlowGraph>& graphs,
                                               const std::vector<CasePrediction>& preds,
                                               const std::vector<RegionSpec>& regions) {
  if (graphs.size() != preds.size() || graphs.empty())
    throw DataError("metric computation needs one prediction per case");
  std::vector<RegionMetrics> out;
  for (const RegionSpec& spec : regions) {
    spec.check();
    RegionMetrics rm;
    rm.spec = spec;
    for (size_t c = 0; c < graphs.size(); ++c) {
      const FlowGraph& g = graphs[c];
      const CasePrediction& pr = preds[c];
      Vec2 center = chord_midpoint(g);
      double ax = spec.a * g.meta.chord;
      double bx = spec.b * g.meta.chord;
      std::vector<char> member(g.num_nodes(), 0);
      long count = 0;
      for (int i = 0; i < g.num_nodes(); ++i) {
        if (g.node_type[i] != NodeType::Fluid) continue;
        double dx = (g.node_pos[i].x - center.x) / ax;
        double dy = (g.node_pos[i].y - center.y) / bx;
        if (dx * dx + dy * dy <= 1.0) {
          member[i] = 1;
          ++count;
        }
      }
      if (count == 0) continue;
      rm.rmse_ux += detail::masked_rmse(pr.ux, g.target_ux, member, count);
      rm.rmse_uy += detail::masked_rmse(pr.uy, g.target_uy, member, count);
      rm.member_nodes += count;
      rm.cases_with_members += 1;
    }
    if (rm.cases_with_members > 0) {
      rm.rmse_ux /= rm.cases_with_members;
      rm.rmse_uy /= rm.cases_with_members;
    }
    out.push_back(rm);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plot-ready exports
// ---------------------------------------------------------------------------

inline void export_fields(const FlowGraph& g, const CasePrediction& pred,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "fields.csv", std::ios::binary);
    if (!f) throw IoError("cannot write fields.csv in " + dir.string());
    f << "x,y,type,p_true,p_pred,ux_true,ux_pred,uy_true,uy_pred\n";
    for (int i = 0; i < g.num_nodes(); ++i) {
      f << format_g17(g.node_pos[i].x) << ',' << format_g17(g.node_pos[i].y) << ','
        << node_type_name(g.node_type[i]) << ',' << format_g17(g.target_p[i]) << ','
        << format_g17(pred.p[i]) << ',' << format_g17(g.target_ux[i]) << ','
        << format_g17(pred.ux[i]) << ',' << format_g17(g.target_uy[i]) << ','
        << format_g17(pred.uy[i]) << '\n';
    }
  }
  {
    std::ofstream f(dir / "globals.csv", std::ios::binary);
    if (!f) throw IoError("cannot write globals.csv in " + dir.string());
    f << "u_inf_true,u_inf_pred,alpha_true,alpha_pred,ti_true,ti_pred\n";
    f << format_g17(g.global_true.u_inf) << ',' << format_g17(pred.ctx.u_inf_pred) << ','
      << format_g17(g.global_true.alpha_deg) << ',' << format_g17(pred.ctx.alpha_pred_deg) << ','
      << format_g17(g.global_true.ti) << ',' << format_g17(pred.ctx.ti_pred) << '\n';
  }
}

inline void write_metrics_csv(const MetricsReport& rep, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << "metric,value\n";
  f << "pressure_rmse_pa," << format_g17(rep.rmse_p) << "\n";
  f << "x_velocity_rmse_ms," << format_g17(rep.rmse_ux) << "\n";
  f << "y_velocity_rmse_ms," << format_g17(rep.rmse_uy) << "\n";
  f << "farfield_velocity_rmse_ms," << format_g17(rep.rmse_u_inf) << "\n";
  f << "angle_of_attack_rmse_deg," << format_g17(rep.rmse_alpha) << "\n";
  f << "turbulence_intensity_rmse," << format_g17(rep.rmse_ti) << "\n";
  for (const RegionMetrics& rm : rep.regions) {
    std::string tag = "region_a" + format_g17(rm.spec.a) + "_b" + format_g17(rm.spec.b);
    f << tag << "_x_velocity_rmse_ms," << format_g17(rm.rmse_ux) << "\n";
    f << tag << "_y_velocity_rmse_ms," << format_g17(rm.rmse_uy) << "\n";
    f << tag << "_member_nodes," << rm.member_nodes << "\n";
  }
}

}  // namespace gale
