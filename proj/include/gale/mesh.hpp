#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gale/common.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Unstructured 2-D mesh: polygonal cells over shared vertices, plus named
// boundary patches ("airfoil", "farfield") and optional per-cell fields.
// ---------------------------------------------------------------------------

struct PatchFace {
  int v0{0};
  int v1{0};
  std::optional<double> pressure;  // surface pressure on airfoil faces
};

struct Patch {
  std::string name;
  std::vector<PatchFace> faces;
};

struct CellField {
  double p{0.0};
  double ux{0.0};
  double uy{0.0};
};

struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::vector<int>> cells;  // CCW vertex polygons
  std::vector<Patch> patches;
  std::vector<CellField> fields;  // optional; empty or one per cell

  bool has_fields() const { return !fields.empty(); }

  const Patch* find_patch(const std::string& name) const {
    for (const Patch& p : patches)
      if (p.name == name) return &p;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

inline double polygon_signed_area(const std::vector<Vec2>& vs, const std::vector<int>& poly) {
  double a = 0.0;
  const size_t k = poly.size();
  for (size_t i = 0; i < k; ++i) {
    const Vec2& p = vs[poly[i]];
    const Vec2& q = vs[poly[(i + 1) % k]];
    a += p.cross(q);
  }
  return 0.5 * a;
}

inline Vec2 polygon_centroid(const std::vector<Vec2>& vs, const std::vector<int>& poly) {
  double a = 0.0;
  Vec2 c{0.0, 0.0};
  const size_t k = poly.size();
  for (size_t i = 0; i < k; ++i) {
    const Vec2& p = vs[poly[i]];
    const Vec2& q = vs[poly[(i + 1) % k]];
    double w = p.cross(q);
    a += w;
    c.x += (p.x + q.x) * w;
    c.y += (p.y + q.y) * w;
  }
  a *= 0.5;
  return {c.x / (6.0 * a), c.y / (6.0 * a)};
}

namespace detail {

inline bool segments_properly_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return (q - p).cross(r - p);
  };
  double o1 = orient(a, b, c), o2 = orient(a, b, d);
  double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

inline bool polygon_is_simple(const std::vector<Vec2>& vs, const std::vector<int>& poly) {
  const size_t k = poly.size();
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = i + 1; j < k; ++j) {
      // Skip adjacent edges (they share a vertex).
      if (j == i || (j + 1) % k == i || (i + 1) % k == j) continue;
      if (segments_properly_intersect(vs[poly[i]], vs[poly[(i + 1) % k]], vs[poly[j]],
                                      vs[poly[(j + 1) % k]]))
        return false;
    }
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Face connectivity.  An undirected face key (min,max vertex) maps to the
// cells flanking it: interior faces have two, boundary faces one.
// ---------------------------------------------------------------------------

struct FaceUse {
  int cell{-1};
  int v0{0};  // face endpoints in the cell's CCW order
  int v1{0};
};

using FaceMap = std::map<std::pair<int, int>, std::vector<FaceUse>>;

inline FaceMap build_face_map(const Mesh& m) {
  FaceMap fm;
  for (int c = 0; c < static_cast<int>(m.cells.size()); ++c) {
    const auto& poly = m.cells[c];
    const size_t k = poly.size();
    for (size_t i = 0; i < k; ++i) {
      int a = poly[i], b = poly[(i + 1) % k];
      fm[{std::min(a, b), std::max(a, b)}].push_back({c, a, b});
    }
  }
  return fm;
}

/// Checks all Mesh invariants, throwing on the first violation.
inline void check_mesh(const Mesh& m) {
  for (size_t c = 0; c < m.cells.size(); ++c) {
    const auto& poly = m.cells[c];
    if (poly.size() < 3) throw GeometryError("cell " + std::to_string(c) + " has fewer than 3 vertices");
    for (int v : poly)
      if (v < 0 || v >= static_cast<int>(m.vertices.size()))
        throw ReferenceError("cell " + std::to_string(c) + " references vertex " + std::to_string(v) +
                             " of " + std::to_string(m.vertices.size()));
    if (polygon_signed_area(m.vertices, poly) <= 0.0)
      throw GeometryError("cell " + std::to_string(c) + " is not counter-clockwise");
    if (!detail::polygon_is_simple(m.vertices, poly))
      throw GeometryError("cell " + std::to_string(c) + " is self-intersecting");
  }

  FaceMap fm = build_face_map(m);
  for (const auto& [key, uses] : fm) {
    if (uses.size() > 2)
      throw TopologyError("face (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                          ") is shared by more than two cells");
  }

  for (const Patch& p : m.patches) {
    for (const PatchFace& f : p.faces) {
      if (f.v0 < 0 || f.v0 >= static_cast<int>(m.vertices.size()) || f.v1 < 0 ||
          f.v1 >= static_cast<int>(m.vertices.size()))
        throw ReferenceError("patch '" + p.name + "' face references vertex out of range");
      auto it = fm.find({std::min(f.v0, f.v1), std::max(f.v0, f.v1)});
      if (it == fm.end() || it->second.size() != 1)
        throw TopologyError("patch '" + p.name + "' face (" + std::to_string(f.v0) + "," +
                            std::to_string(f.v1) + ") does not lie on exactly one cell");
    }
  }

  if (!m.fields.empty() && m.fields.size() != m.cells.size())
    throw DataError("cellfields count differs from cell count");
}

/// Interior faces: shared by exactly two cells.
inline std::vector<std::pair<FaceUse, FaceUse>> interior_faces(const FaceMap& fm) {
  std::vector<std::pair<FaceUse, FaceUse>> out;
  for (const auto& [key, uses] : fm)
    if (uses.size() == 2) out.push_back({uses[0], uses[1]});
  return out;
}

// ---------------------------------------------------------------------------
// Mesh file parser.  UTF-8 text, header `meshfmt 1`, sections `vertices`,
// `cells`, `patch <name>`, `cellfields`; 0-based indices throughout.
// ---------------------------------------------------------------------------

inline Mesh parse_mesh(const std::string& text) {
  Mesh mesh;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      size_t h = line.find('#');
      if (h != std::string::npos) line.erase(h);
      size_t b = line.find_last_not_of(" \t\r");
      if (b == std::string::npos) continue;
      line.erase(b + 1);
      return true;
    }
    return false;
  };
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("line " + std::to_string(line_no) + ": " + msg);
  };

  if (!next_line() || line != "meshfmt 1") throw fail("expected header 'meshfmt 1'");

  while (next_line()) {
    std::istringstream hdr(line);
    std::string section;
    hdr >> section;

    if (section == "vertices") {
      int n = -1;
      if (!(hdr >> n) || n < 0) throw fail("bad vertex count");
      for (int i = 0; i < n; ++i) {
        if (!next_line()) throw fail("unexpected end of file in vertices");
        std::istringstream ls(line);
        Vec2 v;
        if (!(ls >> v.x >> v.y)) throw fail("malformed vertex line");
        mesh.vertices.push_back(v);
      }
    } else if (section == "cells") {
      int n = -1;
      if (!(hdr >> n) || n < 0) throw fail("bad cell count");
      for (int i = 0; i < n; ++i) {
        if (!next_line()) throw fail("unexpected end of file in cells");
        std::istringstream ls(line);
        std::vector<int> poly;
        int v;
        while (ls >> v) poly.push_back(v);
        if (!ls.eof()) throw fail("malformed cell line");
        if (poly.size() < 3) throw fail("cell needs at least 3 vertices");
        mesh.cells.push_back(std::move(poly));
      }
    } else if (section == "patch") {
      std::string name;
      int n = -1;
      if (!(hdr >> name >> n) || n < 0) throw fail("bad patch header");
      Patch patch;
      patch.name = name;
      for (int i = 0; i < n; ++i) {
        if (!next_line()) throw fail("unexpected end of file in patch");
        std::istringstream ls(line);
        PatchFace f;
        if (!(ls >> f.v0 >> f.v1)) throw fail("malformed patch face line");
        double pr;
        if (ls >> pr) f.pressure = pr;
        patch.faces.push_back(f);
      }
      mesh.patches.push_back(std::move(patch));
    } else if (section == "cellfields") {
      int n = -1;
      if (!(hdr >> n) || n < 0) throw fail("bad cellfields count");
      for (int i = 0; i < n; ++i) {
        if (!next_line()) throw fail("unexpected end of file in cellfields");
        std::istringstream ls(line);
        CellField f;
        if (!(ls >> f.p >> f.ux >> f.uy)) throw fail("malformed cellfields line");
        mesh.fields.push_back(f);
      }
    } else {
      throw fail("unknown section '" + section + "'");
    }
  }

  check_mesh(mesh);
  return mesh;
}

}  // namespace gale
