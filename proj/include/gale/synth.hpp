#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gale/graph_io.hpp"
#include "gale/mesh_graph.hpp"
#include "gale/potential_flow.hpp"
#include "gale/rng.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Case description
// ---------------------------------------------------------------------------

struct CylinderSpec {
  double radius{0.5};
};
struct JoukowskiSpec {
  double eps{0.08};
  double mu_y{0.02};
  double chord{1.0};
};

struct CaseRecord {
  std::variant<CylinderSpec, JoukowskiSpec> shape{JoukowskiSpec{}};
  double u_inf{10.0};     // m/s
  double alpha_deg{0.0};  // degrees
  double ti_label{0.0};   // fixed 0 for synthetic data
  double rho{1.225};      // kg/m^3
  int rings{16};
  int sectors{64};
  uint64_t seed{0};
  std::string case_id{"case"};

  void check() const {
    if (u_inf <= 0.0) throw ConfigError("u_inf must be positive");
    if (rho <= 0.0) throw ConfigError("rho must be positive");
    if (rings < 2) throw ConfigError("need at least 2 rings");
    if (sectors < 8) throw ConfigError("need at least 8 sectors");
    if (std::abs(alpha_deg) > 30.0) throw ConfigError("|alpha| must be at most 30 degrees");
  }
};

inline BodyShape make_shape(const CaseRecord& rec) {
  if (const auto* c = std::get_if<CylinderSpec>(&rec.shape)) return BodyShape::cylinder(c->radius);
  const auto& j = std::get<JoukowskiSpec>(rec.shape);
  return BodyShape::joukowski(j.eps, j.mu_y, j.chord);
}

// ---------------------------------------------------------------------------
// O-grid meshing: concentric circles in the circle plane, mapped through the
// body's conformal map.  A grid vertex is anchored at the trailing edge.
// ---------------------------------------------------------------------------

/// Builds an O-grid of `rings` cell rings by `sectors` around the body.  The
/// outermost vertex ring clears `outer_chords` chord lengths from the chord
/// midpoint in every sector.
inline Mesh build_ogrid(const BodyShape& shape, int rings, int sectors, double outer_chords = 2.05) {
  const int R = rings, S = sectors;
  const Vec2 center = shape.chord_mid();
  const double a = shape.circle_radius();

  // Distance of the mapped ring at radius ratio rho from the chord midpoint.
  auto ring_min_dist = [&](double rho) {
    double dmin = 1e300;
    for (int j = 0; j < S; ++j) {
      double th = shape.theta_te() + 2.0 * kPi * j / S;
      Complex z = shape.map(shape.circle_center() + a * rho * std::polar(1.0, th));
      double d = distance({z.real(), z.imag()}, center);
      if (d < dmin) dmin = d;
    }
    return dmin;
  };

  const double target = outer_chords * shape.chord();
  double rho_max = (target + std::abs(shape.circle_center())) / a + 1.0;
  for (int it = 0; it < 32; ++it) {
    double d = ring_min_dist(rho_max);
    if (d >= target && d <= target * 1.001) break;
    rho_max *= target / d;
  }

  Mesh mesh;
  const double growth = std::pow(rho_max, 1.0 / R);
  for (int r = 0; r <= R; ++r) {
    double rho = std::pow(growth, r);
    for (int j = 0; j < S; ++j) {
      double th = shape.theta_te() + 2.0 * kPi * j / S;
      Complex z = shape.map(shape.circle_center() + a * rho * std::polar(1.0, th));
      mesh.vertices.push_back({z.real(), z.imag()});
    }
  }

  auto vid = [S](int r, int j) { return r * S + ((j % S) + S) % S; };
  for (int r = 0; r < R; ++r)
    for (int j = 0; j < S; ++j)
      mesh.cells.push_back({vid(r, j), vid(r + 1, j), vid(r + 1, j + 1), vid(r, j + 1)});

  Patch airfoil;
  airfoil.name = "airfoil";
  for (int j = 0; j < S; ++j) airfoil.faces.push_back({vid(0, j), vid(0, j + 1), std::nullopt});
  mesh.patches.push_back(std::move(airfoil));

  Patch farfield;
  farfield.name = "farfield";
  for (int j = 0; j < S; ++j) farfield.faces.push_back({vid(R, j), vid(R, j + 1), std::nullopt});
  mesh.patches.push_back(std::move(farfield));

  return mesh;
}

// ---------------------------------------------------------------------------
// Case generation
// ---------------------------------------------------------------------------

/// Fills surface pressures (at wall-face arc midpoints, exactly on the body)
/// and per-cell fields (at centroids) from the analytic solution.
inline void fill_fields(Mesh& mesh, const BodyShape& shape, const CaseRecord& rec) {
  const int S = rec.sectors;
  const double alpha_rad = deg_to_rad(rec.alpha_deg);
  for (Patch& p : mesh.patches) {
    if (p.name != "airfoil") continue;
    for (int j = 0; j < S; ++j) {
      double th_mid = shape.theta_te() + 2.0 * kPi * (j + 0.5) / S;
      Vec2 u = shape.surface_velocity(th_mid, rec.u_inf, alpha_rad);
      p.faces[j].pressure = pressure_from_velocity(u, rec.u_inf, rec.rho);
    }
  }
  mesh.fields.resize(mesh.cells.size());
  for (size_t c = 0; c < mesh.cells.size(); ++c) {
    Vec2 pos = polygon_centroid(mesh.vertices, mesh.cells[c]);
    Vec2 u = potential_velocity(shape, rec.u_inf, rec.alpha_deg, pos);
    mesh.fields[c] = {pressure_from_velocity(u, rec.u_inf, rec.rho), u.x, u.y};
  }
}

struct GeneratedCase {
  Mesh mesh;
  FlowGraph graph;
};

/// Full synthetic pipeline: O-grid out to ~2 chords, analytic fields,
/// cells_to_graph -> truncate_to_radius(1) -> add_perimeter_edges.
inline GeneratedCase generate_case(const CaseRecord& rec) {
  rec.check();
  BodyShape shape = make_shape(rec);

  GeneratedCase out;
  out.mesh = build_ogrid(shape, rec.rings, rec.sectors);
  fill_fields(out.mesh, shape, rec);

  FlowGraph g = cells_to_graph(out.mesh, shape.chord(), rec.case_id, /*require_fields=*/true);
  g = truncate_to_radius(g, 1.0);
  g = add_perimeter_edges(g);
  g.global_true = {rec.u_inf, rec.alpha_deg, rec.ti_label};
  out.graph = std::move(g);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct SamplingRanges {
  double u_min{5.0}, u_max{50.0};          // m/s
  double alpha_min{-15.0}, alpha_max{15.0};  // degrees
  double eps_min{0.02}, eps_max{0.15};
  double mu_y_min{-0.05}, mu_y_max{0.1};
};

struct DatasetOptions {
  int rings{24};
  int sectors{64};
  double train_frac{0.8};
  double val_frac{0.1};
  double test_frac{0.1};
  SamplingRanges ranges;
};

inline CaseRecord sample_case(uint64_t dataset_seed, int index, const DatasetOptions& opt) {
  Rng rng(mix64(dataset_seed + 0x5ca1ab1e + static_cast<uint64_t>(index)));
  JoukowskiSpec j;
  j.eps = rng.uniform(opt.ranges.eps_min, opt.ranges.eps_max);
  j.mu_y = rng.uniform(opt.ranges.mu_y_min, opt.ranges.mu_y_max);
  j.chord = 1.0;
  CaseRecord rec;
  rec.shape = j;
  rec.u_inf = rng.uniform(opt.ranges.u_min, opt.ranges.u_max);
  rec.alpha_deg = rng.uniform(opt.ranges.alpha_min, opt.ranges.alpha_max);
  rec.rings = opt.rings;
  rec.sectors = opt.sectors;
  rec.seed = mix64(dataset_seed ^ static_cast<uint64_t>(index));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case_%04d", index);
  rec.case_id = buf;
  return rec;
}

/// Writes n_cases graph bundles plus a deterministic split manifest.
inline DatasetManifest make_dataset(int n_cases, uint64_t seed, const std::filesystem::path& out_dir,
                                    const DatasetOptions& opt = {}) {
  if (n_cases < 10) throw ConfigError("need at least 10 cases");
  double fsum = opt.train_frac + opt.val_frac + opt.test_frac;
  if (std::abs(fsum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  std::filesystem::create_directories(out_dir);

  std::vector<std::string> ids;
  for (int i = 0; i < n_cases; ++i) {
    CaseRecord rec = sample_case(seed, i, opt);
    GeneratedCase gc = generate_case(rec);
    write_bundle(gc.graph, out_dir / rec.case_id);
    ids.push_back(rec.case_id);
  }

  Rng split_rng(mix64(seed));
  std::vector<std::string> shuffled = ids;
  split_rng.shuffle(shuffled);
  int n_train = static_cast<int>(opt.train_frac * n_cases);
  int n_val = static_cast<int>(opt.val_frac * n_cases);

  DatasetManifest man;
  man.seed = seed;
  man.train.assign(shuffled.begin(), shuffled.begin() + n_train);
  man.val.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
  man.test.assign(shuffled.begin() + n_train + n_val, shuffled.end());
  man.parameter_ranges = {
      {"u_inf", {opt.ranges.u_min, opt.ranges.u_max}},
      {"alpha_deg", {opt.ranges.alpha_min, opt.ranges.alpha_max}},
      {"eps", {opt.ranges.eps_min, opt.ranges.eps_max}},
      {"mu_y", {opt.ranges.mu_y_min, opt.ranges.mu_y_max}},
      {"chord", {1.0, 1.0}},
      {"rings", opt.rings},
      {"sectors", opt.sectors},
  };
  write_manifest(man, out_dir);
  return man;
}

}  // namespace gale
