#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "gale/common.hpp"
#include "gale/tensor.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Node and edge model
// ---------------------------------------------------------------------------

enum class NodeType : uint8_t { Wall = 0, Fluid = 1, Farfield = 2 };

inline const char* node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Wall: return "wall";
    case NodeType::Fluid: return "fluid";
    case NodeType::Farfield: return "farfield";
  }
  return "?";
}

inline NodeType node_type_from_name(const std::string& s) {
  if (s == "wall") return NodeType::Wall;
  if (s == "fluid") return NodeType::Fluid;
  if (s == "farfield") return NodeType::Farfield;
  throw ParseError("unknown node type '" + s + "'");
}

/// One-hot layout: (fluid, farfield, wall).
inline void one_hot(NodeType t, double out[3]) {
  out[0] = t == NodeType::Fluid ? 1.0 : 0.0;
  out[1] = t == NodeType::Farfield ? 1.0 : 0.0;
  out[2] = t == NodeType::Wall ? 1.0 : 0.0;
}

struct Edge {
  int32_t src{0};
  int32_t dst{0};
};

/// Per-edge geometric features: unit relative direction (src -> dst),
/// centroid/midpoint distance, and the shared-face length l.
struct EdgeFeature {
  double dir_x{0.0};
  double dir_y{0.0};
  double length{0.0};
  double boundary_len{0.0};
};

struct GlobalContext {
  double u_inf{0.0};      // m/s
  double alpha_deg{0.0};  // degrees
  double ti{0.0};         // turbulence intensity, dimensionless
};

struct CaseMeta {
  std::string case_id;
  double chord{1.0};    // meters
  int fluid_count{0};   // m
  int wall_count{0};    // p
};

/// The central exchange format: a directed graph over finite-volume cells and
/// airfoil surface faces.  Immutable by convention after construction.
struct FlowGraph {
  std::vector<Vec2> node_pos;
  std::vector<NodeType> node_type;
  std::vector<double> pressure_in;        // Pa, meaningful where valid
  std::vector<uint8_t> pressure_valid;    // 1 exactly on Wall nodes
  std::vector<Edge> edges;
  std::vector<EdgeFeature> edge_feat;
  std::vector<double> target_p;
  std::vector<double> target_ux;
  std::vector<double> target_uy;
  GlobalContext global_true;
  CaseMeta meta;

  int num_nodes() const { return static_cast<int>(node_pos.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  int count_type(NodeType t) const {
    return static_cast<int>(std::count(node_type.begin(), node_type.end(), t));
  }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Checks every FlowGraph invariant and reports all violations with indices.
inline ValidationReport validate_graph(const FlowGraph& g) {
  ValidationReport rep;
  const int n = g.num_nodes();
  const int m = g.num_edges();

  auto add = [&rep](std::string msg) { rep.problems.push_back(std::move(msg)); };

  if (g.node_type.size() != static_cast<size_t>(n) || g.pressure_in.size() != static_cast<size_t>(n) ||
      g.pressure_valid.size() != static_cast<size_t>(n) || g.target_p.size() != static_cast<size_t>(n) ||
      g.target_ux.size() != static_cast<size_t>(n) || g.target_uy.size() != static_cast<size_t>(n)) {
    add("node array lengths disagree");
    return rep;
  }
  if (g.edge_feat.size() != static_cast<size_t>(m)) {
    add("edge_feat length differs from edge count");
    return rep;
  }

  // Index range / self-edge checks.
  for (int e = 0; e < m; ++e) {
    const Edge& ed = g.edges[e];
    if (ed.src < 0 || ed.src >= n || ed.dst < 0 || ed.dst >= n)
      add("edge " + std::to_string(e) + " references node out of range");
    else if (ed.src == ed.dst)
      add("edge " + std::to_string(e) + " is a self-edge on node " + std::to_string(ed.src));
  }

  // Pressure mask: valid exactly on Wall nodes.
  for (int i = 0; i < n; ++i) {
    bool is_wall = g.node_type[i] == NodeType::Wall;
    bool valid = g.pressure_valid[i] != 0;
    if (is_wall && !valid) add("wall node " + std::to_string(i) + " has no input pressure");
    if (!is_wall && valid) add("non-wall node " + std::to_string(i) + " carries input pressure");
  }

  // Unit direction norms.
  for (int e = 0; e < m; ++e) {
    const EdgeFeature& f = g.edge_feat[e];
    double nrm = std::hypot(f.dir_x, f.dir_y);
    if (std::abs(nrm - 1.0) > 1e-9)
      add("edge " + std::to_string(e) + " direction norm " + format_g17(nrm) + " not unit");
  }

  // Bidirectionality: each (i,j) needs (j,i) with negated direction and equal
  // lengths.  Sort-and-scan over (src,dst) keys.
  {
    std::vector<int> order(m);
    for (int e = 0; e < m; ++e) order[e] = e;
    auto key = [&g](int e) {
      return (static_cast<uint64_t>(static_cast<uint32_t>(g.edges[e].src)) << 32) |
             static_cast<uint32_t>(g.edges[e].dst);
    };
    std::sort(order.begin(), order.end(), [&key](int a, int b) { return key(a) < key(b); });
    for (int idx = 0; idx + 1 < m; ++idx) {
      if (key(order[idx]) == key(order[idx + 1]))
        add("duplicate edge (" + std::to_string(g.edges[order[idx]].src) + "," +
            std::to_string(g.edges[order[idx]].dst) + ")");
    }
    auto find_edge = [&](int32_t s, int32_t d) -> int {
      uint64_t k = (static_cast<uint64_t>(static_cast<uint32_t>(s)) << 32) | static_cast<uint32_t>(d);
      int lo = 0, hi = m;
      while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (key(order[mid]) < k)
          lo = mid + 1;
        else
          hi = mid;
      }
      if (lo < m && key(order[lo]) == k) return order[lo];
      return -1;
    };
    for (int e = 0; e < m; ++e) {
      const Edge& ed = g.edges[e];
      if (ed.src < 0 || ed.src >= n || ed.dst < 0 || ed.dst >= n || ed.src == ed.dst) continue;
      int r = find_edge(ed.dst, ed.src);
      if (r < 0) {
        add("edge (" + std::to_string(ed.src) + "," + std::to_string(ed.dst) + ") has no reciprocal");
        continue;
      }
      const EdgeFeature& f = g.edge_feat[e];
      const EdgeFeature& fr = g.edge_feat[r];
      if (std::abs(f.dir_x + fr.dir_x) > 1e-12 || std::abs(f.dir_y + fr.dir_y) > 1e-12)
        add("edge (" + std::to_string(ed.src) + "," + std::to_string(ed.dst) +
            ") reciprocal direction is not the negation");
      if (f.length != fr.length || f.boundary_len != fr.boundary_len)
        add("edge (" + std::to_string(ed.src) + "," + std::to_string(ed.dst) +
            ") reciprocal lengths differ");
    }
  }

  // Meta counts.
  if (g.meta.wall_count != g.count_type(NodeType::Wall))
    add("meta wall count " + std::to_string(g.meta.wall_count) + " != actual " +
        std::to_string(g.count_type(NodeType::Wall)));
  if (g.meta.fluid_count != g.count_type(NodeType::Fluid))
    add("meta fluid count " + std::to_string(g.meta.fluid_count) + " != actual " +
        std::to_string(g.count_type(NodeType::Fluid)));

  return rep;
}

// ---------------------------------------------------------------------------
// Feature grouping (processor input splitting)
// ---------------------------------------------------------------------------

struct GroupedFeatures {
  std::vector<Tensor<double>> groups;
};

/// Splits a width-N node feature matrix into C contiguous column groups.
inline GroupedFeatures split_groups(const Tensor<double>& V, int C) {
  if (C <= 0) throw ConfigError("group count must be positive");
  if (V.cols() % C != 0)
    throw ConfigError("group count " + std::to_string(C) + " does not divide width " +
                      std::to_string(V.cols()));
  const int gw = V.cols() / C;
  GroupedFeatures out;
  out.groups.reserve(C);
  for (int k = 0; k < C; ++k) {
    Tensor<double> g(V.rows(), gw);
    for (int i = 0; i < V.rows(); ++i) {
      const double* src = V.row(i) + static_cast<size_t>(k) * gw;
      std::copy(src, src + gw, g.row(i));
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

/// Exact inverse of split_groups: concatenation along the feature dimension.
inline Tensor<double> merge_groups(const GroupedFeatures& gf) {
  if (gf.groups.empty()) throw ShapeError("merge_groups: no groups");
  const int rows = gf.groups.front().rows();
  int width = 0;
  for (const auto& g : gf.groups) {
    if (g.rows() != rows) throw ShapeError("merge_groups: mismatched row counts");
    width += g.cols();
  }
  Tensor<double> V(rows, width);
  int off = 0;
  for (const auto& g : gf.groups) {
    for (int i = 0; i < rows; ++i) std::copy(g.row(i), g.row(i) + g.cols(), V.row(i) + off);
    off += g.cols();
  }
  return V;
}

// ---------------------------------------------------------------------------
// Adjacency view for message passing
// ---------------------------------------------------------------------------

/// In-edge CSR grouped by destination.  Within each destination, edges keep
/// their edge-list order, so per-node reductions are fixed-order and node
/// relabelings that preserve the edge list reduce in the same order.
struct CsrIn {
  std::vector<int> offsets;   // size n+1
  std::vector<int> edge_ids;  // size m, edge index into FlowGraph::edges
};

inline CsrIn build_csr_in(int num_nodes, const std::vector<Edge>& edges) {
  CsrIn csr;
  csr.offsets.assign(num_nodes + 1, 0);
  for (const Edge& e : edges) csr.offsets[e.dst + 1]++;
  for (int i = 0; i < num_nodes; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.edge_ids.resize(edges.size());
  std::vector<int> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) csr.edge_ids[cursor[edges[e].dst]++] = e;
  return csr;
}

/// Out-edge CSR grouped by source; used by deterministic gradient scatter.
inline CsrIn build_csr_out(int num_nodes, const std::vector<Edge>& edges) {
  CsrIn csr;
  csr.offsets.assign(num_nodes + 1, 0);
  for (const Edge& e : edges) csr.offsets[e.src + 1]++;
  for (int i = 0; i < num_nodes; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.edge_ids.resize(edges.size());
  std::vector<int> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) csr.edge_ids[cursor[edges[e].src]++] = e;
  return csr;
}

}  // namespace gale
