#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "gale/graph.hpp"
#include "gale/mesh.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Wall geometry queries.  A Wall node has exactly one non-wall neighbor: the
// cell its boundary face belongs to.  That edge carries the face length as
// boundary_len, and its direction (face midpoint -> cell centroid) points
// into the fluid, i.e. along the outward surface normal.
// ---------------------------------------------------------------------------

inline int wall_interior_edge(const FlowGraph& g, int wall_node) {
  for (int e = 0; e < g.num_edges(); ++e) {
    if (g.edges[e].src == wall_node && g.node_type[g.edges[e].dst] != NodeType::Wall) return e;
  }
  return -1;
}

struct WallGeom {
  double face_len{0.0};
  Vec2 outward_normal{0.0, 0.0};
};

inline std::vector<WallGeom> wall_geometry(const FlowGraph& g) {
  std::vector<WallGeom> out;
  const int p = g.meta.wall_count;
  out.reserve(p);
  // One linear pass; wall nodes occupy indices [0, p).
  std::vector<int> interior_edge(p, -1);
  for (int e = 0; e < g.num_edges(); ++e) {
    int s = g.edges[e].src;
    if (s < p && g.node_type[g.edges[e].dst] != NodeType::Wall && interior_edge[s] < 0)
      interior_edge[s] = e;
  }
  for (int w = 0; w < p; ++w) {
    if (g.node_type[w] != NodeType::Wall) throw DataError("wall nodes are not stored first");
    if (interior_edge[w] < 0)
      throw DataError("wall node " + std::to_string(w) + " has no interior neighbor");
    const EdgeFeature& f = g.edge_feat[interior_edge[w]];
    out.push_back({f.boundary_len, {f.dir_x, f.dir_y}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// cells_to_graph
// ---------------------------------------------------------------------------

namespace detail {

/// Orders the airfoil patch faces into a connectivity chain.  Returns face
/// indices in walk order; closed loops start at the face with the lowest
/// index.  Multiple components are concatenated (downstream geometric checks
/// will reject them when a closed loop is required).
inline std::vector<int> chain_patch_faces(const Patch& patch) {
  const int n = static_cast<int>(patch.faces.size());
  std::map<int, std::vector<int>> by_vertex;
  for (int i = 0; i < n; ++i) {
    by_vertex[patch.faces[i].v0].push_back(i);
    by_vertex[patch.faces[i].v1].push_back(i);
  }
  std::vector<char> used(n, 0);
  std::vector<int> order;
  order.reserve(n);
  for (int start = 0; start < n; ++start) {
    if (used[start]) continue;
    // Walk backwards first so open chains start at an endpoint.
    int first = start;
    {
      int cur = start, entry_vertex = patch.faces[start].v0;
      while (true) {
        const auto& cands = by_vertex[entry_vertex];
        int prev = -1;
        for (int c : cands)
          if (c != cur && !used[c]) prev = c;
        if (prev < 0 || prev == start) break;
        entry_vertex = patch.faces[prev].v0 == entry_vertex ? patch.faces[prev].v1 : patch.faces[prev].v0;
        cur = prev;
        first = prev;
        if (cur == start) break;
      }
    }
    int cur = first;
    int lead = patch.faces[first].v1;
    used[first] = 1;
    order.push_back(first);
    while (true) {
      const auto& cands = by_vertex[lead];
      int next = -1;
      for (int c : cands)
        if (!used[c]) next = c;
      if (next < 0) break;
      used[next] = 1;
      order.push_back(next);
      lead = patch.faces[next].v0 == lead ? patch.faces[next].v1 : patch.faces[next].v0;
    }
  }
  return order;
}

inline EdgeFeature geometric_edge(const Vec2& from, const Vec2& to, double face_len) {
  Vec2 d = to - from;
  double len = d.norm();
  if (len <= 0.0) throw GeometryError("coincident node positions produce a zero-length edge");
  return {d.x / len, d.y / len, len, face_len};
}

}  // namespace detail

/// Converts a finite-volume mesh into a FlowGraph: one Fluid node per cell at
/// its centroid, one Wall node per airfoil patch face at the face midpoint,
/// bidirectional edges across interior faces and wall faces.  Wall nodes are
/// stored first, in perimeter-chain order.
inline FlowGraph cells_to_graph(const Mesh& m, double chord, const std::string& case_id = "",
                                bool require_fields = false) {
  check_mesh(m);
  if (chord <= 0.0) throw ConfigError("chord must be positive");
  if (require_fields && !m.has_fields())
    throw DataError("mesh carries no cell fields but targets were requested");

  FlowGraph g;
  g.meta.case_id = case_id;
  g.meta.chord = chord;

  const Patch* airfoil = m.find_patch("airfoil");
  std::vector<int> face_order;
  if (airfoil) face_order = detail::chain_patch_faces(*airfoil);
  const int p = static_cast<int>(face_order.size());
  const int ncells = static_cast<int>(m.cells.size());

  FaceMap fm = build_face_map(m);

  // Wall nodes first (chain order), then cells.
  for (int k = 0; k < p; ++k) {
    const PatchFace& f = airfoil->faces[face_order[k]];
    Vec2 mid = (m.vertices[f.v0] + m.vertices[f.v1]) * 0.5;
    g.node_pos.push_back(mid);
    g.node_type.push_back(NodeType::Wall);
    if (!f.pressure)
      throw DataError("airfoil face (" + std::to_string(f.v0) + "," + std::to_string(f.v1) +
                      ") carries no surface pressure");
    g.pressure_in.push_back(*f.pressure);
    g.pressure_valid.push_back(1);
    g.target_p.push_back(*f.pressure);
    // Wall nodes sit on the no-slip boundary.
    g.target_ux.push_back(0.0);
    g.target_uy.push_back(0.0);
  }

  for (int c = 0; c < ncells; ++c) {
    g.node_pos.push_back(polygon_centroid(m.vertices, m.cells[c]));
    g.node_type.push_back(NodeType::Fluid);
    g.pressure_in.push_back(0.0);
    g.pressure_valid.push_back(0);
    if (m.has_fields()) {
      g.target_p.push_back(m.fields[c].p);
      g.target_ux.push_back(m.fields[c].ux);
      g.target_uy.push_back(m.fields[c].uy);
    } else {
      g.target_p.push_back(0.0);
      g.target_ux.push_back(0.0);
      g.target_uy.push_back(0.0);
    }
  }

  // Wall <-> cell edges, walking the wall chain.
  for (int k = 0; k < p; ++k) {
    const PatchFace& f = airfoil->faces[face_order[k]];
    auto it = fm.find({std::min(f.v0, f.v1), std::max(f.v0, f.v1)});
    const FaceUse& use = it->second.front();
    int cell_node = p + use.cell;
    double face_len = distance(m.vertices[f.v0], m.vertices[f.v1]);
    g.edges.push_back({k, cell_node});
    g.edge_feat.push_back(detail::geometric_edge(g.node_pos[k], g.node_pos[cell_node], face_len));
    g.edges.push_back({cell_node, k});
    g.edge_feat.push_back(detail::geometric_edge(g.node_pos[cell_node], g.node_pos[k], face_len));
  }

  // Interior faces, in face-key order.
  for (const auto& [key, uses] : fm) {
    if (uses.size() != 2) continue;
    int a = p + uses[0].cell;
    int b = p + uses[1].cell;
    double face_len = distance(m.vertices[key.first], m.vertices[key.second]);
    g.edges.push_back({a, b});
    g.edge_feat.push_back(detail::geometric_edge(g.node_pos[a], g.node_pos[b], face_len));
    g.edges.push_back({b, a});
    g.edge_feat.push_back(detail::geometric_edge(g.node_pos[b], g.node_pos[a], face_len));
  }

  g.meta.wall_count = p;
  g.meta.fluid_count = ncells;
  return g;
}

// ---------------------------------------------------------------------------
// truncate_to_radius
// ---------------------------------------------------------------------------

/// Chord midpoint derived from the extreme Wall node positions along x.
inline Vec2 chord_midpoint(const FlowGraph& g) {
  int le = -1, te = -1;
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (g.node_type[i] != NodeType::Wall) continue;
    if (le < 0 || g.node_pos[i].x < g.node_pos[le].x) le = i;
    if (te < 0 || g.node_pos[i].x > g.node_pos[te].x) te = i;
  }
  if (le < 0) throw DataError("graph has no wall nodes; cannot locate the airfoil");
  return (g.node_pos[le] + g.node_pos[te]) * 0.5;
}

/// Removes nodes outside `radius` chord lengths of the chord midpoint,
/// retypes surviving Fluid nodes that lost an exterior neighbor to Farfield,
/// and compacts indices keeping Wall, Fluid, Farfield contiguous in order.
inline FlowGraph truncate_to_radius(const FlowGraph& g, double radius_chords) {
  if (radius_chords <= 0.0) throw ConfigError("truncation radius must be positive");
  const Vec2 center = chord_midpoint(g);
  const double r = radius_chords * g.meta.chord;
  const int n = g.num_nodes();

  std::vector<char> keep(n, 0);
  for (int i = 0; i < n; ++i) keep[i] = distance(g.node_pos[i], center) <= r ? 1 : 0;

  std::vector<NodeType> new_type(g.node_type);
  for (const Edge& e : g.edges) {
    if (keep[e.src] && !keep[e.dst] && g.node_type[e.src] == NodeType::Fluid)
      new_type[e.src] = NodeType::Farfield;
    if (keep[e.dst] && !keep[e.src] && g.node_type[e.dst] == NodeType::Fluid)
      new_type[e.dst] = NodeType::Farfield;
  }

  int fluid_kept = 0;
  for (int i = 0; i < n; ++i)
    if (keep[i] && new_type[i] == NodeType::Fluid) ++fluid_kept;
  if (fluid_kept == 0)
    throw GeometryError("degenerate domain: truncation at " + format_g17(radius_chords) +
                        " chords removes all fluid nodes");

  // Stable partition into Wall, Fluid, Farfield.
  std::vector<int> remap(n, -1);
  int next = 0;
  for (NodeType t : {NodeType::Wall, NodeType::Fluid, NodeType::Farfield})
    for (int i = 0; i < n; ++i)
      if (keep[i] && new_type[i] == t) remap[i] = next++;

  FlowGraph out;
  out.meta = g.meta;
  out.global_true = g.global_true;
  out.node_pos.resize(next);
  out.node_type.resize(next);
  out.pressure_in.resize(next);
  out.pressure_valid.resize(next);
  out.target_p.resize(next);
  out.target_ux.resize(next);
  out.target_uy.resize(next);
  for (int i = 0; i < n; ++i) {
    if (remap[i] < 0) continue;
    int j = remap[i];
    out.node_pos[j] = g.node_pos[i];
    out.node_type[j] = new_type[i];
    out.pressure_in[j] = g.pressure_in[i];
    out.pressure_valid[j] = g.pressure_valid[i];
    out.target_p[j] = g.target_p[i];
    out.target_ux[j] = g.target_ux[i];
    out.target_uy[j] = g.target_uy[i];
  }
  for (int e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edges[e];
    if (remap[ed.src] < 0 || remap[ed.dst] < 0) continue;
    out.edges.push_back({remap[ed.src], remap[ed.dst]});
    out.edge_feat.push_back(g.edge_feat[e]);
  }
  out.meta.wall_count = out.count_type(NodeType::Wall);
  out.meta.fluid_count = out.count_type(NodeType::Fluid);
  return out;
}

// ---------------------------------------------------------------------------
// add_perimeter_edges
// ---------------------------------------------------------------------------

/// Inserts bidirectional edges between consecutive Wall nodes (closed loop).
/// Wall node order is the perimeter-chain order established by
/// cells_to_graph; adjacency is verified geometrically: consecutive face
/// midpoints can be no farther apart than the half-sum of the face lengths.
inline FlowGraph add_perimeter_edges(const FlowGraph& g) {
  const int p = g.meta.wall_count;
  if (p == 0) throw TopologyError("no wall nodes; nothing to connect");
  if (p < 3) throw TopologyError("wall nodes form no closed chain (need at least 3)");

  std::vector<WallGeom> wg = wall_geometry(g);

  FlowGraph out = g;
  for (int i = 0; i < p; ++i) {
    int j = (i + 1) % p;
    double bound = 0.5 * (wg[i].face_len + wg[j].face_len);
    if (distance(g.node_pos[i], g.node_pos[j]) > bound * (1.0 + 1e-9))
      throw TopologyError("wall nodes " + std::to_string(i) + " and " + std::to_string(j) +
                          " are not adjacent; wall nodes form no single closed chain");
  }
  for (int i = 0; i < p; ++i) {
    int j = (i + 1) % p;
    double blen = 0.5 * (wg[i].face_len + wg[j].face_len);
    out.edges.push_back({i, j});
    out.edge_feat.push_back(detail::geometric_edge(g.node_pos[i], g.node_pos[j], blen));
    out.edges.push_back({j, i});
    out.edge_feat.push_back(detail::geometric_edge(g.node_pos[j], g.node_pos[i], blen));
  }
  return out;
}

}  // namespace gale
