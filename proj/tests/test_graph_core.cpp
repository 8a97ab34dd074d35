#include <catch2/catch_amalgamated.hpp>

#include "gale/graph.hpp"
#include "gale/rng.hpp"
#include "testutil.hpp"

using namespace gale;

namespace {

/// 3-node triangle with reciprocal unit-direction edges; node 0 is a Wall.
FlowGraph triangle_graph() {
  FlowGraph g;
  g.node_pos = {{0.0, 0.0}, {1.0, 0.0}, {0.5, 1.0}};
  g.node_type = {NodeType::Wall, NodeType::Fluid, NodeType::Fluid};
  g.pressure_in = {10.0, 0.0, 0.0};
  g.pressure_valid = {1, 0, 0};
  g.target_p = {10.0, 1.0, 2.0};
  g.target_ux = {0.0, 1.0, 1.0};
  g.target_uy = {0.0, 0.0, 0.0};
  auto add_pair = [&g](int a, int b) {
    Vec2 d = (g.node_pos[b] - g.node_pos[a]).normalized();
    double len = distance(g.node_pos[a], g.node_pos[b]);
    g.edges.push_back({a, b});
    g.edge_feat.push_back({d.x, d.y, len, 0.5});
    g.edges.push_back({b, a});
    g.edge_feat.push_back({-d.x, -d.y, len, 0.5});
  };
  add_pair(0, 1);
  add_pair(1, 2);
  add_pair(2, 0);
  g.meta.wall_count = 1;
  g.meta.fluid_count = 2;
  return g;
}

}  // namespace

TEST_CASE("validate_graph accepts a well-formed triangle") {
  FlowGraph g = triangle_graph();
  ValidationReport rep = validate_graph(g);
  CAPTURE(rep.problems);
  REQUIRE(rep.ok());
}

TEST_CASE("validate_graph reports a missing reciprocal edge") {
  FlowGraph g = triangle_graph();
  g.edges.pop_back();  // drop (2,0)... actually drops (0,2)'s reciprocal
  g.edge_feat.pop_back();
  ValidationReport rep = validate_graph(g);
  REQUIRE_FALSE(rep.ok());
  bool mentions = false;
  for (const auto& p : rep.problems)
    if (p.find("no reciprocal") != std::string::npos) mentions = true;
  REQUIRE(mentions);
}

TEST_CASE("validate_graph reports pressure set on a fluid node") {
  FlowGraph g = triangle_graph();
  g.pressure_valid[1] = 1;
  g.pressure_in[1] = 3.0;
  ValidationReport rep = validate_graph(g);
  REQUIRE_FALSE(rep.ok());
  bool mentions = false;
  for (const auto& p : rep.problems)
    if (p.find("non-wall node 1") != std::string::npos) mentions = true;
  REQUIRE(mentions);
}

TEST_CASE("validate_graph flags self-edges and range violations") {
  FlowGraph g = triangle_graph();
  g.edges.push_back({1, 1});
  g.edge_feat.push_back({1.0, 0.0, 1.0, 1.0});
  g.edges.push_back({0, 7});
  g.edge_feat.push_back({1.0, 0.0, 1.0, 1.0});
  ValidationReport rep = validate_graph(g);
  REQUIRE(rep.problems.size() >= 2);
}

TEST_CASE("validate_graph flags non-unit directions") {
  FlowGraph g = triangle_graph();
  g.edge_feat[0].dir_x *= 1.001;
  REQUIRE_FALSE(validate_graph(g).ok());
}

TEST_CASE("split_groups slices columns") {
  Tensor<double> v(2, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) v(i, j) = 10.0 * i + j;

  SECTION("C=4 gives four width-1 groups") {
    GroupedFeatures gf = split_groups(v, 4);
    REQUIRE(gf.groups.size() == 4);
    for (int k = 0; k < 4; ++k) {
      REQUIRE(gf.groups[k].cols() == 1);
      REQUIRE(gf.groups[k](1, 0) == 10.0 + k);
    }
  }
  SECTION("C=1 is the identity") {
    GroupedFeatures gf = split_groups(v, 1);
    REQUIRE(gf.groups.size() == 1);
    REQUIRE(max_abs_diff(gf.groups[0], v) == 0.0);
  }
  SECTION("C must divide the width") {
    REQUIRE_THROWS_AS(split_groups(v, 3), ConfigError);
  }
}

TEST_CASE("merge_groups is the exact inverse of split_groups") {
  Rng rng(7);
  SECTION("random 10x8, C=2, bitwise roundtrip") {
    Tensor<double> v(10, 8);
    test::fill_uniform(v, rng);
    Tensor<double> back = merge_groups(split_groups(v, 2));
    REQUIRE(back.rows() == v.rows());
    for (size_t i = 0; i < v.size(); ++i) REQUIRE(back.data()[i] == v.data()[i]);
  }
  SECTION("width-128, C=4, bitwise roundtrip") {
    Tensor<double> v(5, 128);
    test::fill_uniform(v, rng);
    GroupedFeatures gf = split_groups(v, 4);
    REQUIRE(gf.groups.size() == 4);
    REQUIRE(gf.groups[0].cols() == 32);
    Tensor<double> back = merge_groups(gf);
    for (size_t i = 0; i < v.size(); ++i) REQUIRE(back.data()[i] == v.data()[i]);
  }
  SECTION("constant groups concatenate in order") {
    GroupedFeatures gf;
    Tensor<double> a(3, 2), b(3, 2);
    a.fill(1.0);
    b.fill(2.0);
    gf.groups = {a, b};
    Tensor<double> m = merge_groups(gf);
    REQUIRE(m.cols() == 4);
    for (int i = 0; i < 3; ++i) {
      REQUIRE(m(i, 0) == 1.0);
      REQUIRE(m(i, 1) == 1.0);
      REQUIRE(m(i, 2) == 2.0);
      REQUIRE(m(i, 3) == 2.0);
    }
  }
  SECTION("mismatched row counts throw") {
    GroupedFeatures gf;
    gf.groups = {Tensor<double>(3, 2), Tensor<double>(4, 2)};
    REQUIRE_THROWS_AS(merge_groups(gf), ShapeError);
  }
  SECTION("roundtrip over assorted shapes") {
    for (int n : {2, 6, 12}) {
      for (int c : {1, 2, 3, 6}) {
        Tensor<double> v(4, n * c);
        test::fill_uniform(v, rng);
        Tensor<double> back = merge_groups(split_groups(v, c));
        for (size_t i = 0; i < v.size(); ++i) REQUIRE(back.data()[i] == v.data()[i]);
      }
    }
  }
}

TEST_CASE("csr views group edges by endpoint preserving list order") {
  std::vector<Edge> edges{{0, 1}, {1, 0}, {2, 1}, {1, 2}, {0, 2}, {2, 0}};
  CsrIn in = build_csr_in(3, edges);
  // dst=1 receives edge ids 0 and 2, in list order.
  REQUIRE(in.offsets[1 + 1] - in.offsets[1] == 2);
  REQUIRE(in.edge_ids[in.offsets[1]] == 0);
  REQUIRE(in.edge_ids[in.offsets[1] + 1] == 2);
  CsrIn out = build_csr_out(3, edges);
  REQUIRE(out.offsets[0 + 1] - out.offsets[0] == 2);
  REQUIRE(out.edge_ids[out.offsets[0]] == 0);
  REQUIRE(out.edge_ids[out.offsets[0] + 1] == 4);
}
