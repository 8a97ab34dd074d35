#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gale/graph.hpp"

namespace gale {

constexpr int kBundleFormatVersion = 1;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + p.string());
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + p.string());
  return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graph bundle: one directory per case with meta.json, nodes.csv, edges.csv.
// Floats are serialized with 17 significant digits (64-bit round-trip safe).
// ---------------------------------------------------------------------------

inline void write_bundle(const FlowGraph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::json meta;
  meta["format_version"] = kBundleFormatVersion;
  meta["case_id"] = g.meta.case_id;
  meta["chord"] = g.meta.chord;
  meta["fluid_count"] = g.meta.fluid_count;
  meta["wall_count"] = g.meta.wall_count;
  meta["node_count"] = g.num_nodes();
  meta["directed_edge_count"] = g.num_edges();
  meta["undirected_edge_count"] = g.num_edges() / 2;
  meta["u_inf"] = g.global_true.u_inf;
  meta["alpha_deg"] = g.global_true.alpha_deg;
  meta["turbulence_intensity"] = g.global_true.ti;
  {
    auto f = detail::open_out(dir / "meta.json");
    f << meta.dump(2) << "\n";
  }

  {
    auto f = detail::open_out(dir / "nodes.csv");
    f << "index,x,y,type,pressure_in_valid,pressure_in,target_p,target_ux,target_uy\n";
    for (int i = 0; i < g.num_nodes(); ++i) {
      f << i << ',' << format_g17(g.node_pos[i].x) << ',' << format_g17(g.node_pos[i].y) << ','
        << node_type_name(g.node_type[i]) << ',' << int(g.pressure_valid[i]) << ','
        << format_g17(g.pressure_in[i]) << ',' << format_g17(g.target_p[i]) << ','
        << format_g17(g.target_ux[i]) << ',' << format_g17(g.target_uy[i]) << '\n';
    }
  }

  {
    auto f = detail::open_out(dir / "edges.csv");
    f << "src,dst,dir_x,dir_y,edge_len,boundary_len\n";
    for (int e = 0; e < g.num_edges(); ++e) {
      const Edge& ed = g.edges[e];
      const EdgeFeature& ef = g.edge_feat[e];
      f << ed.src << ',' << ed.dst << ',' << format_g17(ef.dir_x) << ',' << format_g17(ef.dir_y)
        << ',' << format_g17(ef.length) << ',' << format_g17(ef.boundary_len) << '\n';
    }
  }
}

inline FlowGraph read_bundle(const std::filesystem::path& dir) {
  FlowGraph g;

  {
    auto f = detail::open_in(dir / "meta.json");
    nlohmann::json meta = nlohmann::json::parse(f);
    if (meta.at("format_version").get<int>() != kBundleFormatVersion)
      throw IoError("unsupported bundle format version in " + dir.string());
    g.meta.case_id = meta.at("case_id").get<std::string>();
    g.meta.chord = meta.at("chord").get<double>();
    g.meta.fluid_count = meta.at("fluid_count").get<int>();
    g.meta.wall_count = meta.at("wall_count").get<int>();
    g.global_true.u_inf = meta.at("u_inf").get<double>();
    g.global_true.alpha_deg = meta.at("alpha_deg").get<double>();
    g.global_true.ti = meta.at("turbulence_intensity").get<double>();
  }

  {
    auto f = detail::open_in(dir / "nodes.csv");
    std::string line;
    std::getline(f, line);  // header
    int expect = 0;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto cols = detail::split_csv_line(line);
      if (cols.size() != 9) throw ParseError("nodes.csv: bad column count in " + dir.string());
      if (std::stoi(cols[0]) != expect) throw ParseError("nodes.csv: indices out of order");
      ++expect;
      g.node_pos.push_back({parse_double(cols[1]), parse_double(cols[2])});
      g.node_type.push_back(node_type_from_name(cols[3]));
      g.pressure_valid.push_back(static_cast<uint8_t>(std::stoi(cols[4])));
      g.pressure_in.push_back(parse_double(cols[5]));
      g.target_p.push_back(parse_double(cols[6]));
      g.target_ux.push_back(parse_double(cols[7]));
      g.target_uy.push_back(parse_double(cols[8]));
    }
  }

  {
    auto f = detail::open_in(dir / "edges.csv");
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto cols = detail::split_csv_line(line);
      if (cols.size() != 6) throw ParseError("edges.csv: bad column count in " + dir.string());
      g.edges.push_back({std::stoi(cols[0]), std::stoi(cols[1])});
      EdgeFeature ef;
      ef.dir_x = parse_double(cols[2]);
      ef.dir_y = parse_double(cols[3]);
      ef.length = parse_double(cols[4]);
      ef.boundary_len = parse_double(cols[5]);
      g.edge_feat.push_back(ef);
    }
  }

  return g;
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

struct DatasetManifest {
  uint64_t seed{0};
  std::vector<std::string> train, val, test;
  nlohmann::json parameter_ranges;

  const std::vector<std::string>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + name + "'");
  }
};

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& dir) {
  nlohmann::json j;
  j["format_version"] = kBundleFormatVersion;
  j["seed"] = m.seed;
  j["splits"]["train"] = m.train;
  j["splits"]["val"] = m.val;
  j["splits"]["test"] = m.test;
  j["parameter_ranges"] = m.parameter_ranges;
  auto f = detail::open_out(dir / "manifest.json");
  f << j.dump(2) << "\n";
}

inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
  auto f = detail::open_in(dir / "manifest.json");
  nlohmann::json j = nlohmann::json::parse(f);
  DatasetManifest m;
  m.seed = j.at("seed").get<uint64_t>();
  m.train = j.at("splits").at("train").get<std::vector<std::string>>();
  m.val = j.at("splits").at("val").get<std::vector<std::string>>();
  m.test = j.at("splits").at("test").get<std::vector<std::string>>();
  if (j.contains("parameter_ranges")) m.parameter_ranges = j["parameter_ranges"];
  return m;
}

}  // namespace gale
