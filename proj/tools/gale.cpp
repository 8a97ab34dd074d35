// gale: flow reconstruction around airfoil-like shapes from surface pressure.
//
// Subcommands: gen (synthetic dataset), parse (mesh file -> graph bundle),
// train, eval (metric suite), reconstruct (field export), params (parameter
// budget report), membench (activation-memory comparison).

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "gale/checkpoint.hpp"
#include "gale/metrics.hpp"
#include "gale/synth.hpp"

namespace fs = std::filesystem;
using namespace gale;

namespace {

int worker_threads() {
  if (const char* env = std::getenv("GALE_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Deterministic parallel map over case indices: results land in a
/// preallocated slot per index, so aggregation order is fixed.
template <typename F>
void parallel_for_cases(int count, F&& fn) {
  int threads = std::min(worker_threads(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        int i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<FlowGraph> load_split(const fs::path& data_dir, const std::string& split) {
  DatasetManifest man = read_manifest(data_dir);
  const std::vector<std::string>& ids = man.split(split);
  if (ids.empty()) throw DataError("split '" + split + "' is empty");
  std::vector<FlowGraph> graphs(ids.size());
  parallel_for_cases(static_cast<int>(ids.size()),
                     [&](int i) { graphs[i] = read_bundle(data_dir / ids[i]); });
  return graphs;
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  fs::path dataset;
  std::string train_split{"train"};
  std::string val_split{"val"};
};

RunConfig read_run_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  nlohmann::json j = nlohmann::json::parse(f);
  RunConfig rc;
  rc.model = model_config_from_json(j.at("model"));
  const auto& t = j.at("train");
  if (t.contains("lr")) rc.train.base_lr = t["lr"].get<double>();
  if (t.contains("decay")) rc.train.decay = t["decay"].get<double>();
  if (t.contains("epochs")) rc.train.epochs = t["epochs"].get<int>();
  if (t.contains("lambda")) rc.train.lambda = t["lambda"].get<double>();
  if (t.contains("seed")) rc.train.seed = t["seed"].get<uint64_t>();
  if (t.contains("fp_iterations")) rc.train.fp_iterations = t["fp_iterations"].get<int>();
  if (t.contains("loss_all_nodes")) rc.train.loss_all_nodes = t["loss_all_nodes"].get<bool>();
  const auto& d = j.at("data");
  rc.dataset = d.at("dataset").get<std::string>();
  if (d.contains("train_split")) rc.train_split = d["train_split"].get<std::string>();
  if (d.contains("val_split")) rc.val_split = d["val_split"].get<std::string>();
  return rc;
}

void write_trace(const std::vector<TraceRow>& trace, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << "step,epoch,lr,node_loss,global_loss,total\n";
  for (const TraceRow& r : trace)
    f << r.step << ',' << r.epoch << ',' << format_g17(r.lr) << ',' << format_g17(r.node_loss)
      << ',' << format_g17(r.global_loss) << ',' << format_g17(r.total) << '\n';
}

int cmd_gen(int cases, uint64_t seed, const fs::path& out, int rings, int sectors) {
  DatasetOptions opt;
  opt.rings = rings;
  opt.sectors = sectors;
  DatasetManifest man = make_dataset(cases, seed, out, opt);
  std::cout << "wrote " << cases << " cases to " << out << " (train " << man.train.size() << ", val "
            << man.val.size() << ", test " << man.test.size() << ")\n";
  return 0;
}

int cmd_parse(const fs::path& mesh_path, const fs::path& out, double chord, double truncate_chords,
              bool perimeter, std::string case_id) {
  std::ifstream f(mesh_path);
  if (!f) throw IoError("cannot read mesh " + mesh_path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  Mesh mesh = parse_mesh(ss.str());

  if (chord <= 0.0) {
    // Derive the chord from the airfoil patch extent.
    const Patch* air = mesh.find_patch("airfoil");
    if (!air || air->faces.empty())
      throw DataError("mesh has no airfoil patch; pass --chord explicitly");
    double mn = 1e300, mx = -1e300;
    for (const PatchFace& pf : air->faces) {
      for (int v : {pf.v0, pf.v1}) {
        mn = std::min(mn, mesh.vertices[v].x);
        mx = std::max(mx, mesh.vertices[v].x);
      }
    }
    chord = mx - mn;
  }
  if (case_id.empty()) case_id = mesh_path.stem().string();

  FlowGraph g = cells_to_graph(mesh, chord, case_id);
  if (truncate_chords > 0.0) g = truncate_to_radius(g, truncate_chords);
  if (perimeter) g = add_perimeter_edges(g);

  ValidationReport rep = validate_graph(g);
  if (!rep.ok()) {
    for (const auto& p : rep.problems) std::cerr << "invalid graph: " << p << "\n";
    return 1;
  }
  write_bundle(g, out);
  std::cout << "wrote bundle " << out << " (" << g.num_nodes() << " nodes, " << g.num_edges()
            << " directed edges)\n";
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& out_dir) {
  RunConfig rc = read_run_config(config_path);
  std::vector<FlowGraph> train_graphs = load_split(rc.dataset, rc.train_split);
  std::vector<FlowGraph> val_graphs;
  try {
    val_graphs = load_split(rc.dataset, rc.val_split);
  } catch (const DataError&) {
    // no validation split; final parameters double as the selection
  }

  TrainResult res = train(train_graphs, val_graphs, rc.model, rc.train);

  fs::create_directories(out_dir);
  write_trace(res.trace, out_dir / "trace.csv");
  save_params(out_dir / "params.bin", res.params);
  save_params(out_dir / "params_best.bin", res.best);
  {
    ModelParams scratch = res.params.zero_clone();
    ParamRegistry reg = make_registry(res.params, scratch);
    save_adam(out_dir / "adam.bin", res.adam_step, res.adam_m, res.adam_v, reg);
  }
  std::cout << "trained " << res.trace.size() << " steps";
  if (res.best_epoch >= 0)
    std::cout << "; best validation loss " << res.best_val << " at epoch " << res.best_epoch;
  std::cout << "\nwrote " << (out_dir / "params.bin") << "\n";
  return 0;
}

int cmd_eval(const std::string& model_list, const fs::path& data_dir, const std::string& split,
             const fs::path& out_csv, bool pooled) {
  std::vector<FlowGraph> graphs = load_split(data_dir, split);

  std::vector<std::string> model_paths;
  std::stringstream ss(model_list);
  std::string item;
  while (std::getline(ss, item, ',')) model_paths.push_back(item);

  MetricsReport mean;
  for (const std::string& mp : model_paths) {
    ModelParams params = load_params(mp);
    std::vector<CasePrediction> preds(graphs.size());
    parallel_for_cases(static_cast<int>(graphs.size()),
                       [&](int i) { preds[i] = to_prediction(reconstruct(graphs[i], params)); });
    MetricsReport rep = rmse_global(graphs, preds, pooled);
    rep.regions = rmse_regions(graphs, preds, default_regions());
    if (mean.case_count == 0) {
      mean = rep;
    } else {
      mean.rmse_p += rep.rmse_p;
      mean.rmse_ux += rep.rmse_ux;
      mean.rmse_uy += rep.rmse_uy;
      mean.rmse_u_inf += rep.rmse_u_inf;
      mean.rmse_alpha += rep.rmse_alpha;
      mean.rmse_ti += rep.rmse_ti;
      for (size_t r = 0; r < mean.regions.size(); ++r) {
        mean.regions[r].rmse_ux += rep.regions[r].rmse_ux;
        mean.regions[r].rmse_uy += rep.regions[r].rmse_uy;
      }
    }
  }
  double k = static_cast<double>(model_paths.size());
  mean.rmse_p /= k;
  mean.rmse_ux /= k;
  mean.rmse_uy /= k;
  mean.rmse_u_inf /= k;
  mean.rmse_alpha /= k;
  mean.rmse_ti /= k;
  for (auto& r : mean.regions) {
    r.rmse_ux /= k;
    r.rmse_uy /= k;
  }

  std::printf("%-34s %14s\n", "metric", "value");
  std::printf("%-34s %14.6g\n", "pressure RMSE [Pa]", mean.rmse_p);
  std::printf("%-34s %14.6g\n", "x-velocity RMSE [m/s]", mean.rmse_ux);
  std::printf("%-34s %14.6g\n", "y-velocity RMSE [m/s]", mean.rmse_uy);
  std::printf("%-34s %14.6g\n", "farfield velocity RMSE [m/s]", mean.rmse_u_inf);
  std::printf("%-34s %14.6g\n", "angle of attack RMSE [deg]", mean.rmse_alpha);
  std::printf("%-34s %14.6g\n", "turbulence intensity RMSE [-]", mean.rmse_ti);
  for (const RegionMetrics& r : mean.regions)
    std::printf("region a=%.2f b=%.2f  ux %10.6g  uy %10.6g  (%ld nodes)\n", r.spec.a, r.spec.b,
                r.rmse_ux, r.rmse_uy, r.member_nodes);

  if (!out_csv.empty()) {
    write_metrics_csv(mean, out_csv);
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

int cmd_reconstruct(const fs::path& model_path, const fs::path& case_dir, const fs::path& out_dir) {
  ModelParams params = load_params(model_path);
  FlowGraph g = read_bundle(case_dir);
  Reconstruction rec = reconstruct(g, params);
  export_fields(g, to_prediction(rec), out_dir);
  std::cout << "wrote " << (out_dir / "fields.csv") << " and globals.csv (" << g.num_nodes()
            << " nodes)\n";
  std::cout << "estimated context: u_hat=" << rec.input_ctx.u_hat_inf
            << " m/s, c_n_hat=" << rec.input_ctx.c_hat_n << "\n";
  std::cout << "predicted farfield: u=" << rec.ctx.u_inf_pred
            << " m/s, alpha=" << rec.ctx.alpha_pred_deg << " deg, ti=" << rec.ctx.ti_pred << "\n";
  return 0;
}

int cmd_params(const std::string& kind, int latent, int layers, int groups) {
  ProcessorConfig cfg;
  cfg.layer.kind = layer_kind_from_name(kind);
  cfg.latent = latent;
  cfg.layers = layers;
  cfg.groups = groups;
  cfg.check();

  long per_kernel = count_params(cfg.layer, latent, cfg.group_width());
  long proc_total = per_kernel * layers * groups;

  ModelConfig mcfg;
  mcfg.proc = cfg;
  ModelParams model = make_model(mcfg, 0);
  long total = 0;
  model.visit([&total](const std::string&, Tensor<double>& t) { total += static_cast<long>(t.size()); });

  std::printf("kernel: %s, latent %d, layers %d, groups %d (group width %d)\n", kind.c_str(), latent,
              layers, groups, cfg.group_width());
  std::printf("per-kernel f_wk parameters: %ld\n", per_kernel);
  std::printf("processor parameters:       %ld\n", proc_total);
  std::printf("encoder/decoder parameters: %ld\n", total - proc_total);
  std::printf("total trainable parameters: %ld\n", total);
  return 0;
}

int cmd_membench(const std::string& layer_list, int groups, int latent, const std::string& kind,
                 int nodes) {
  ProcessorConfig cfg;
  cfg.layer.kind = layer_kind_from_name(kind);
  cfg.latent = latent;
  cfg.groups = groups;

  std::vector<int> layer_counts;
  std::stringstream ss(layer_list);
  std::string item;
  while (std::getline(ss, item, ',')) layer_counts.push_back(std::stoi(item));

  std::printf("%8s %24s %26s %20s\n", "layers", "reversible peak tensors", "stored-activation peak",
              "backward fwd-evals");
  for (int L : layer_counts) {
    cfg.layers = L;
    cfg.check();
    kernel_eval_count() = 0;
    long rev = peak_activation_count(cfg, nodes);
    // peak_activation_count runs one forward (L*C evals) plus the backward's
    // reconstruction pass (another L*C): the depth-proportional compute cost
    // of not storing activations.
    long backward_evals = kernel_eval_count() - static_cast<long>(L) * groups;
    long ref = reference_peak_activation_count(cfg, nodes);
    std::printf("%8d %24ld %26ld %20ld\n", L, rev, ref, backward_evals);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow reconstruction around airfoils from surface pressure"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic potential-flow dataset");
  int gen_cases = 10;
  uint64_t gen_seed = 0;
  std::string gen_out;
  int gen_rings = 24, gen_sectors = 64;
  gen->add_option("--cases", gen_cases, "number of cases")->required();
  gen->add_option("--seed", gen_seed, "dataset seed")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--rings", gen_rings, "mesh rings");
  gen->add_option("--sectors", gen_sectors, "mesh sectors");

  // parse
  auto* parse = app.add_subcommand("parse", "convert a mesh file to a graph bundle");
  std::string parse_mesh_path, parse_out, parse_case_id;
  double parse_chord = 0.0, parse_trunc = 0.0;
  bool parse_perimeter = false;
  parse->add_option("--mesh", parse_mesh_path, "mesh file")->required();
  parse->add_option("--out", parse_out, "output bundle directory")->required();
  parse->add_option("--chord", parse_chord, "chord length (default: airfoil patch extent)");
  parse->add_option("--truncate", parse_trunc, "truncation radius in chords (0 = keep all)");
  parse->add_flag("--perimeter", parse_perimeter, "add wall perimeter edges");
  parse->add_option("--case-id", parse_case_id, "case identifier");

  // train
  auto* tr = app.add_subcommand("train", "train a model from a run configuration");
  std::string train_config, train_out;
  tr->add_option("--config", train_config, "run configuration JSON")->required();
  tr->add_option("--out", train_out, "output run directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a model on a dataset split");
  std::string eval_model, eval_data, eval_split = "test", eval_out;
  bool eval_pooled = false;
  ev->add_option("--model", eval_model, "checkpoint path (comma list averages runs)")->required();
  ev->add_option("--data", eval_data, "dataset directory")->required();
  ev->add_option("--split", eval_split, "split name (train/val/test)");
  ev->add_option("--out", eval_out, "metrics CSV path");
  ev->add_flag("--pooled", eval_pooled, "pool nodes across cases instead of per-case averaging");

  // reconstruct
  auto* rc = app.add_subcommand("reconstruct", "reconstruct one case and export fields");
  std::string rec_model, rec_case, rec_out;
  rc->add_option("--model", rec_model, "checkpoint path")->required();
  rc->add_option("--case", rec_case, "graph bundle directory")->required();
  rc->add_option("--out", rec_out, "output directory")->required();

  // params
  auto* pa = app.add_subcommand("params", "report trainable parameter counts");
  std::string par_kind = "gat";
  int par_latent = 128, par_layers = 30, par_groups = 4;
  pa->add_option("--kind", par_kind, "kernel kind: gat/gine/gen");
  pa->add_option("--latent", par_latent, "latent width N");
  pa->add_option("--layers", par_layers, "processor depth L");
  pa->add_option("--groups", par_groups, "group count C");

  // membench
  auto* mb = app.add_subcommand("membench", "compare retained-activation peaks across depths");
  std::string mb_layers = "10,50", mb_kind = "gine";
  int mb_groups = 4, mb_latent = 16, mb_nodes = 24;
  mb->add_option("--layers,--L", mb_layers, "comma list of depths");
  mb->add_option("--groups,--C", mb_groups, "group count C");
  mb->add_option("--latent", mb_latent, "latent width N");
  mb->add_option("--kind", mb_kind, "kernel kind");
  mb->add_option("--nodes", mb_nodes, "benchmark graph size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_cases, gen_seed, gen_out, gen_rings, gen_sectors);
    if (parse->parsed())
      return cmd_parse(parse_mesh_path, parse_out, parse_chord, parse_trunc, parse_perimeter,
                       parse_case_id);
    if (tr->parsed()) return cmd_train(train_config, train_out);
    if (ev->parsed()) return cmd_eval(eval_model, eval_data, eval_split, eval_out, eval_pooled);
    if (rc->parsed()) return cmd_reconstruct(rec_model, rec_case, rec_out);
    if (pa->parsed()) return cmd_params(par_kind, par_latent, par_layers, par_groups);
    if (mb->parsed()) return cmd_membench(mb_layers, mb_groups, mb_latent, mb_kind, mb_nodes);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
