#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gale/pipeline.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// ModelConfig <-> JSON
// ---------------------------------------------------------------------------

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["kind"] = layer_kind_name(cfg.proc.layer.kind);
  j["latent"] = cfg.proc.latent;
  j["layers"] = cfg.proc.layers;
  j["groups"] = cfg.proc.groups;
  j["heads"] = cfg.proc.layer.heads;
  j["gine_hidden"] = cfg.proc.layer.gine_hidden;
  j["gen_hidden"] = cfg.proc.layer.gen_hidden;
  j["fp_iterations"] = cfg.fp_iterations;
  j["use_context"] = cfg.use_context;
  j["loss_all_nodes"] = cfg.loss_all_nodes;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.proc.layer.kind = layer_kind_from_name(j.at("kind").get<std::string>());
  cfg.proc.latent = j.at("latent").get<int>();
  cfg.proc.layers = j.at("layers").get<int>();
  cfg.proc.groups = j.at("groups").get<int>();
  if (j.contains("heads")) cfg.proc.layer.heads = j["heads"].get<int>();
  if (j.contains("gine_hidden")) cfg.proc.layer.gine_hidden = j["gine_hidden"].get<int>();
  if (j.contains("gen_hidden")) cfg.proc.layer.gen_hidden = j["gen_hidden"].get<int>();
  if (j.contains("fp_iterations")) cfg.fp_iterations = j["fp_iterations"].get<int>();
  if (j.contains("use_context")) cfg.use_context = j["use_context"].get<bool>();
  if (j.contains("loss_all_nodes")) cfg.loss_all_nodes = j["loss_all_nodes"].get<bool>();
  cfg.check();
  return cfg;
}

// ---------------------------------------------------------------------------
// Checkpoint files: an 8-byte little-endian header length, a JSON header
// listing named blocks with shapes and byte offsets, then the raw payload of
// little-endian 64-bit floats.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u64_le(std::ostream& f, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64_le(std::istream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

// Payload doubles are written in native order; all supported targets are
// little-endian, asserted at compile time below.
static_assert(std::endian::native == std::endian::little, "checkpoint io assumes little-endian");

inline void write_doubles(std::ostream& f, const Tensor<double>& t) {
  f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
}

inline void read_doubles(std::istream& f, Tensor<double>& t) {
  f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
}

}  // namespace detail

inline void save_params(const std::filesystem::path& path, ModelParams& params) {
  nlohmann::json header;
  header["format"] = "gale-params-1";
  header["model"] = model_config_to_json(params.config);
  nlohmann::json blocks = nlohmann::json::array();
  uint64_t offset = 0;
  params.visit([&](const std::string& name, Tensor<double>& t) {
    blocks.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", offset}});
    offset += t.size() * 8;
  });
  header["blocks"] = blocks;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  std::string hs = header.dump();
  detail::write_u64_le(f, hs.size());
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  params.visit([&f](const std::string&, Tensor<double>& t) { detail::write_doubles(f, t); });
  if (!f) throw IoError("write failed for " + path.string());
}

inline ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  uint64_t hlen = detail::read_u64_le(f);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("format").get<std::string>() != "gale-params-1")
    throw IoError("unrecognised checkpoint format in " + path.string());

  ModelConfig cfg = model_config_from_json(header.at("model"));
  ModelParams params = make_model(cfg, 0);

  size_t idx = 0;
  const auto& blocks = header.at("blocks");
  params.visit([&](const std::string& name, Tensor<double>& t) {
    if (idx >= blocks.size()) throw IoError("checkpoint block list too short");
    const auto& b = blocks[idx++];
    if (b.at("name").get<std::string>() != name || b.at("rows").get<int>() != t.rows() ||
        b.at("cols").get<int>() != t.cols())
      throw IoError("checkpoint block mismatch at '" + name + "'");
    detail::read_doubles(f, t);
  });
  if (idx != blocks.size()) throw IoError("checkpoint block list too long");
  if (!f) throw IoError("truncated checkpoint " + path.string());
  return params;
}

/// Adam moments in the same layout, prefixed m./v. per block, with the step
/// count in the header.  `m`/`v` are in registry order.
inline void save_adam(const std::filesystem::path& path, int64_t step,
                      const std::vector<Tensor<double>>& m, const std::vector<Tensor<double>>& v,
                      const ParamRegistry& reg) {
  if (m.size() != reg.size() || v.size() != reg.size())
    throw ShapeError("optimizer moment count differs from the registry");
  nlohmann::json header;
  header["format"] = "gale-adam-1";
  header["step"] = step;
  nlohmann::json blocks = nlohmann::json::array();
  uint64_t offset = 0;
  for (size_t i = 0; i < reg.size(); ++i) {
    for (const char* pre : {"m.", "v."}) {
      blocks.push_back({{"name", pre + reg[i].name},
                        {"rows", reg[i].value->rows()},
                        {"cols", reg[i].value->cols()},
                        {"offset", offset}});
      offset += reg[i].value->size() * 8;
    }
  }
  header["blocks"] = blocks;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  std::string hs = header.dump();
  detail::write_u64_le(f, hs.size());
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (size_t i = 0; i < reg.size(); ++i) {
    detail::write_doubles(f, m[i]);
    detail::write_doubles(f, v[i]);
  }
  if (!f) throw IoError("write failed for " + path.string());
}

inline void save_adam(const std::filesystem::path& path, Adam& adam, const ParamRegistry& reg) {
  save_adam(path, adam.step_count(), adam.moments1(), adam.moments2(), reg);
}

inline void load_adam(const std::filesystem::path& path, Adam& adam, const ParamRegistry& reg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  uint64_t hlen = detail::read_u64_le(f);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("format").get<std::string>() != "gale-adam-1")
    throw IoError("unrecognised optimizer state in " + path.string());
  adam.set_step(header.at("step").get<int64_t>());
  for (size_t i = 0; i < reg.size(); ++i) {
    detail::read_doubles(f, adam.moments1()[i]);
    detail::read_doubles(f, adam.moments2()[i]);
  }
  if (!f) throw IoError("truncated optimizer state " + path.string());
}

}  // namespace gale
