#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gale/checkpoint.hpp"
#include "gale/graph_io.hpp"

using namespace gale;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& capture = {}) {
  std::string cmd = std::string(GALE_CLI_PATH) + " " + args;
  if (!capture.empty()) cmd += " > " + capture.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

long count_lines(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  long n = 0;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) ++n;
  return n;
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / "gale_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
  }
};

}  // namespace

TEST_CASE("cli end-to-end workflow on a seeded 10-case dataset") {
  Workspace ws;
  fs::path data = ws.root / "data";

  SECTION("whole pipeline") {
    // gen
    REQUIRE(run("gen --cases 10 --seed 3 --out " + data.string() + " --rings 6 --sectors 24") == 0);
    REQUIRE(fs::exists(data / "manifest.json"));
    DatasetManifest man = read_manifest(data);
    REQUIRE(man.train.size() == 8);
    REQUIRE(man.test.size() == 1);
    FlowGraph g0 = read_bundle(data / "case_0000");
    REQUIRE(validate_graph(g0).ok());

    // train
    fs::path cfg = ws.root / "run.json";
    {
      std::ofstream f(cfg);
      f << R"({"model": {"kind":"gine","latent":8,"layers":2,"groups":2},
               "train": {"lr":5e-4,"decay":0.97,"epochs":2,"lambda":1.0,"seed":7,"fp_iterations":10},
               "data": {"dataset":")"
        << data.string() << R"("}})";
    }
    fs::path rundir = ws.root / "run";
    REQUIRE(run("train --config " + cfg.string() + " --out " + rundir.string()) == 0);
    REQUIRE(fs::exists(rundir / "params.bin"));
    REQUIRE(fs::exists(rundir / "params_best.bin"));
    REQUIRE(fs::exists(rundir / "adam.bin"));
    REQUIRE(count_lines(rundir / "trace.csv") == 1 + 2 * 8);  // header + steps
    ModelParams loaded = load_params(rundir / "params.bin");
    REQUIRE(loaded.config.proc.latent == 8);

    // eval
    fs::path metrics = ws.root / "metrics.csv";
    REQUIRE(run("eval --model " + (rundir / "params.bin").string() + " --data " + data.string() +
                " --split test --out " + metrics.string()) == 0);
    std::string body = slurp(metrics);
    REQUIRE(body.find("pressure_rmse_pa") != std::string::npos);
    REQUIRE(body.find("region_a0.6") != std::string::npos);

    // reconstruct
    fs::path recon = ws.root / "recon";
    REQUIRE(run("reconstruct --model " + (rundir / "params.bin").string() + " --case " +
                (data / "case_0001").string() + " --out " + recon.string()) == 0);
    FlowGraph g1 = read_bundle(data / "case_0001");
    REQUIRE(count_lines(recon / "fields.csv") == 1 + g1.num_nodes());
    REQUIRE(fs::exists(recon / "globals.csv"));
  }
}

TEST_CASE("cli parses a mesh file into a valid bundle") {
  Workspace ws;
  fs::path mesh = ws.root / "square.msh";
  {
    std::ofstream f(mesh);
    f << "meshfmt 1\n"
         "vertices 6\n0 0\n1 0\n2 0\n0 1\n1 1\n2 1\n"
         "cells 2\n0 1 4 3\n1 2 5 4\n"
         "patch airfoil 2\n0 1 5.0\n1 2 7.0\n"
         "cellfields 2\n1 0.5 0\n2 0.25 0\n";
  }
  fs::path out = ws.root / "bundle";
  REQUIRE(run("parse --mesh " + mesh.string() + " --out " + out.string() + " --chord 2") == 0);
  FlowGraph g = read_bundle(out);
  REQUIRE(g.num_nodes() == 4);  // 2 walls + 2 cells
  REQUIRE(validate_graph(g).ok());
  REQUIRE(g.meta.chord == 2.0);
}

TEST_CASE("cli params reports the baseline budget") {
  Workspace ws;
  fs::path outp = ws.root / "params.txt";
  REQUIRE(run("params --kind gine --latent 128 --layers 30 --groups 4", outp) == 0);
  std::string body = slurp(outp);
  REQUIRE(body.find("per-kernel f_wk parameters") != std::string::npos);
  REQUIRE(body.find("total trainable parameters") != std::string::npos);
}

TEST_CASE("cli membench shows depth-independent reversible peaks") {
  Workspace ws;
  fs::path outp = ws.root / "mem.txt";
  REQUIRE(run("membench --layers 10,50 --groups 4 --latent 16 --nodes 24", outp) == 0);
  std::string body = slurp(outp);
  // Two data rows with equal reversible peaks.
  std::istringstream ss(body);
  std::string line;
  std::getline(ss, line);  // header
  long l10 = 0, rev10 = -1, ref10 = -1, ev10 = -1;
  long l50 = 0, rev50 = -1, ref50 = -1, ev50 = -1;
  ss >> l10 >> rev10 >> ref10 >> ev10;
  ss >> l50 >> rev50 >> ref50 >> ev50;
  REQUIRE(l10 == 10);
  REQUIRE(l50 == 50);
  REQUIRE(rev10 == rev50);
  REQUIRE(ref50 > ref10);
  REQUIRE(ev50 == 5 * ev10);  // reconstruction cost scales with depth
}

TEST_CASE("cli exits 2 on usage errors") {
  REQUIRE(run("", "/dev/null") == 2);
  REQUIRE(run("eval --nonsense", "/dev/null") == 2);
}

TEST_CASE("cli reports clean errors for missing inputs") {
  Workspace ws;
  REQUIRE(run("eval --model nope.bin --data nowhere --split test", "/dev/null") == 1);
  REQUIRE(run("parse --mesh missing.msh --out " + (ws.root / "x").string(), "/dev/null") == 1);
}
