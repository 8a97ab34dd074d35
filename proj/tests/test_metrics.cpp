#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "gale/metrics.hpp"
#include "gale/synth.hpp"
#include "testutil.hpp"

using namespace gale;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

FlowGraph metric_case(uint64_t variant) {
  CaseRecord rec;
  rec.shape = JoukowskiSpec{0.09, 0.02, 1.0};
  rec.u_inf = 10.0 + static_cast<double>(variant);
  rec.alpha_deg = 2.0;
  rec.rings = 8;
  rec.sectors = 32;
  rec.case_id = "m" + std::to_string(variant);
  return generate_case(rec).graph;
}

CasePrediction perfect(const FlowGraph& g) {
  CasePrediction p;
  p.p = g.target_p;
  p.ux = g.target_ux;
  p.uy = g.target_uy;
  p.ctx = {g.global_true.u_inf, g.global_true.alpha_deg, g.global_true.ti};
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("perfect predictions give all-zero metrics") {
  std::vector<FlowGraph> graphs = {metric_case(0), metric_case(1)};
  std::vector<CasePrediction> preds = {perfect(graphs[0]), perfect(graphs[1])};
  MetricsReport rep = rmse_global(graphs, preds);
  REQUIRE(rep.rmse_p == 0.0);
  REQUIRE(rep.rmse_ux == 0.0);
  REQUIRE(rep.rmse_uy == 0.0);
  REQUIRE(rep.rmse_u_inf == 0.0);
  REQUIRE(rep.rmse_alpha == 0.0);
  REQUIRE(rep.rmse_ti == 0.0);
}

TEST_CASE("a constant pressure offset yields exactly that rmse") {
  std::vector<FlowGraph> graphs = {metric_case(0)};
  CasePrediction p = perfect(graphs[0]);
  for (double& v : p.p) v += 1.0;
  MetricsReport rep = rmse_global(graphs, {p});
  REQUIRE(rep.rmse_p == Approx(1.0).epsilon(1e-12));
  REQUIRE(rep.rmse_ux == 0.0);
}

TEST_CASE("hand-built two-case metrics match manual arithmetic") {
  std::vector<FlowGraph> graphs = {metric_case(0), metric_case(1)};
  std::vector<CasePrediction> preds = {perfect(graphs[0]), perfect(graphs[1])};
  // Case 0: +2 Pa on every fluid node; case 1: +4 Pa.  Per-case RMSE 2 and 4,
  // averaged to 3.  Velocity: +0.5 m/s on ux of case 1 only -> mean 0.25.
  for (int i = 0; i < graphs[0].num_nodes(); ++i)
    if (graphs[0].node_type[i] == NodeType::Fluid) preds[0].p[i] += 2.0;
  for (int i = 0; i < graphs[1].num_nodes(); ++i)
    if (graphs[1].node_type[i] == NodeType::Fluid) {
      preds[1].p[i] += 4.0;
      preds[1].ux[i] += 0.5;
    }
  preds[0].ctx.u_inf_pred += 1.0;   // |err| 1, case 1 exact -> mean 0.5
  preds[1].ctx.alpha_pred_deg -= 3.0;  // mean 1.5

  MetricsReport rep = rmse_global(graphs, preds);
  REQUIRE(rep.rmse_p == Approx(3.0).margin(1e-12));
  REQUIRE(rep.rmse_ux == Approx(0.25).margin(1e-12));
  REQUIRE(rep.rmse_uy == 0.0);
  REQUIRE(rep.rmse_u_inf == Approx(0.5).margin(1e-12));
  REQUIRE(rep.rmse_alpha == Approx(1.5).margin(1e-12));
}

TEST_CASE("default regions are the three published ellipses") {
  auto regions = default_regions();
  REQUIRE(regions.size() == 3);
  REQUIRE(regions[0].a == 0.6);
  REQUIRE(regions[0].b == 0.1);
  REQUIRE(regions[1].a == 0.7);
  REQUIRE(regions[1].b == 0.15);
  REQUIRE(regions[2].a == 0.8);
  REQUIRE(regions[2].b == 0.2);
}

TEST_CASE("whole-domain ellipse reproduces the global velocity rmse exactly") {
  std::vector<FlowGraph> graphs = {metric_case(0), metric_case(1)};
  std::vector<CasePrediction> preds = {perfect(graphs[0]), perfect(graphs[1])};
  Rng rng(5);
  for (auto& p : preds)
    for (size_t i = 0; i < p.ux.size(); ++i) {
      p.ux[i] += rng.uniform(-1.0, 1.0);
      p.uy[i] += rng.uniform(-1.0, 1.0);
    }
  MetricsReport global = rmse_global(graphs, preds);
  auto regions = rmse_regions(graphs, preds, {{100.0, 100.0}});
  REQUIRE(regions[0].rmse_ux == global.rmse_ux);  // bitwise
  REQUIRE(regions[0].rmse_uy == global.rmse_uy);
}

TEST_CASE("region membership grows with the ellipse") {
  std::vector<FlowGraph> graphs = {metric_case(0)};
  std::vector<CasePrediction> preds = {perfect(graphs[0])};
  auto regions = rmse_regions(graphs, preds, default_regions());
  REQUIRE(regions[0].member_nodes <= regions[1].member_nodes);
  REQUIRE(regions[1].member_nodes <= regions[2].member_nodes);
  REQUIRE(regions[0].member_nodes > 0);
}

TEST_CASE("regions with no fluid members are excluded") {
  std::vector<FlowGraph> graphs = {metric_case(0)};
  std::vector<CasePrediction> preds = {perfect(graphs[0])};
  // An ellipse thinner than the first mesh ring holds no cell centroids.
  auto regions = rmse_regions(graphs, preds, {{1e-4, 1e-5}});
  REQUIRE(regions[0].cases_with_members == 0);
  REQUIRE(regions[0].member_nodes == 0);
  REQUIRE(regions[0].rmse_ux == 0.0);
}

TEST_CASE("region specs are validated") {
  std::vector<FlowGraph> graphs = {metric_case(0)};
  std::vector<CasePrediction> preds = {perfect(graphs[0])};
  REQUIRE_THROWS_AS(rmse_regions(graphs, preds, {{0.1, 0.2}}), ConfigError);
}

TEST_CASE("metric computation is reproducible bitwise") {
  std::vector<FlowGraph> graphs = {metric_case(0), metric_case(1)};
  std::vector<CasePrediction> preds = {perfect(graphs[0]), perfect(graphs[1])};
  Rng rng(9);
  for (auto& p : preds)
    for (size_t i = 0; i < p.p.size(); ++i) p.p[i] += rng.uniform(-5.0, 5.0);
  MetricsReport a = rmse_global(graphs, preds);
  MetricsReport b = rmse_global(graphs, preds);
  REQUIRE(a.rmse_p == b.rmse_p);
  REQUIRE(a.rmse_u_inf == b.rmse_u_inf);
}

TEST_CASE("pooled aggregation differs from per-case averaging when cases differ") {
  std::vector<FlowGraph> graphs = {metric_case(0), metric_case(1)};
  std::vector<CasePrediction> preds = {perfect(graphs[0]), perfect(graphs[1])};
  for (int i = 0; i < graphs[0].num_nodes(); ++i)
    if (graphs[0].node_type[i] == NodeType::Fluid) preds[0].p[i] += 2.0;
  MetricsReport per_case = rmse_global(graphs, preds, false);
  MetricsReport pooled = rmse_global(graphs, preds, true);
  REQUIRE(per_case.rmse_p == Approx(1.0).margin(1e-12));
  REQUIRE(pooled.rmse_p > 1.0);  // sqrt of pooled mean square
}

TEST_CASE("export_fields round-trips values and row counts") {
  FlowGraph g = metric_case(0);
  CasePrediction pred = perfect(g);
  Rng rng(3);
  for (size_t i = 0; i < pred.p.size(); ++i) pred.p[i] += rng.uniform(-1.0, 1.0);
  fs::path dir = fs::temp_directory_path() / "gale_export_test";
  fs::remove_all(dir);
  export_fields(g, pred, dir);

  std::ifstream f(dir / "fields.csv");
  std::string line;
  std::getline(f, line);
  REQUIRE(line == "x,y,type,p_true,p_pred,ux_true,ux_pred,uy_true,uy_pred");
  int rows = 0;
  std::vector<double> p_pred_back;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    ++rows;
    auto cols = gale::detail::split_csv_line(line);
    REQUIRE(cols.size() == 9);
    p_pred_back.push_back(parse_double(cols[4]));
  }
  REQUIRE(rows == g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) REQUIRE(p_pred_back[i] == pred.p[i]);

  std::ifstream gf(dir / "globals.csv");
  std::getline(gf, line);
  REQUIRE(line == "u_inf_true,u_inf_pred,alpha_true,alpha_pred,ti_true,ti_pred");
  std::getline(gf, line);
  auto cols = gale::detail::split_csv_line(line);
  REQUIRE(parse_double(cols[0]) == g.global_true.u_inf);
  fs::remove_all(dir);
}

TEST_CASE("export matches the pinned golden bytes") {
  // Deterministic tiny case with prediction = truth; any formatting change
  // must be deliberate.
  CaseRecord rec;
  rec.shape = CylinderSpec{0.5};
  rec.u_inf = 10.0;
  rec.alpha_deg = 0.0;
  rec.rings = 2;
  rec.sectors = 8;
  rec.case_id = "golden";
  BodyShape shape = make_shape(rec);
  Mesh mesh = build_ogrid(shape, rec.rings, rec.sectors);
  fill_fields(mesh, shape, rec);
  FlowGraph g = cells_to_graph(mesh, shape.chord(), rec.case_id);
  g.global_true = {rec.u_inf, rec.alpha_deg, 0.0};
  CasePrediction pred = perfect(g);

  fs::path dir = fs::temp_directory_path() / "gale_golden_test";
  fs::remove_all(dir);
  export_fields(g, pred, dir);

  fs::path golden = fs::path(GALE_TEST_DIR) / "golden";
  REQUIRE(slurp(dir / "fields.csv") == slurp(golden / "fields.csv"));
  REQUIRE(slurp(dir / "globals.csv") == slurp(golden / "globals.csv"));
  fs::remove_all(dir);
}

TEST_CASE("metrics csv is written with documented headers") {
  std::vector<FlowGraph> graphs = {metric_case(0)};
  std::vector<CasePrediction> preds = {perfect(graphs[0])};
  MetricsReport rep = rmse_global(graphs, preds);
  rep.regions = rmse_regions(graphs, preds, default_regions());
  fs::path p = fs::temp_directory_path() / "gale_metrics_test.csv";
  write_metrics_csv(rep, p);
  std::string body = slurp(p);
  REQUIRE(body.find("pressure_rmse_pa,0") != std::string::npos);
  REQUIRE(body.find("angle_of_attack_rmse_deg,0") != std::string::npos);
  REQUIRE(body.find("region_a0.8") != std::string::npos);
  fs::remove(p);
}

TEST_CASE("metric computation rejects mismatched inputs") {
  std::vector<FlowGraph> graphs = {metric_case(0)};
  std::vector<CasePrediction> preds;
  REQUIRE_THROWS_AS(rmse_global(graphs, preds), DataError);
  preds.push_back(perfect(graphs[0]));
  preds[0].p.pop_back();
  REQUIRE_THROWS_AS(rmse_global(graphs, preds), DataError);
}
