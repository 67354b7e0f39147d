#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathflow/errors.hpp"
#include "pathflow/nn/network.hpp"

namespace pathflow::nn {

// Side information stored with the weights so evaluation is self-contained.
struct ModelMeta {
  std::string task;  // idh | codel | survival_class | survival_cox
  std::string head;  // binary | cox
  int patch_size = 0;
  int patches_per_slide = 0;
  std::array<double, 3> norm_mean{0.0, 0.0, 0.0};
  std::array<double, 3> norm_std{1.0, 1.0, 1.0};
  std::optional<double> survival_cutoff_days;  // survival_class only
};

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("truncated model file: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ofstream& out, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("truncated model file: " + path);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

inline nlohmann::json spec_to_json(const LayerSpec& s) {
  return {{"kind", kind_name(s.kind)}, {"in_c", s.in_c},   {"out_c", s.out_c}, {"k", s.k},
          {"stride", s.stride},        {"pad", s.pad},     {"units", s.units}};
}

inline LayerSpec spec_from_json(const nlohmann::json& j) {
  LayerSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv") s.kind = LayerSpec::Kind::Conv;
  else if (kind == "batchnorm") s.kind = LayerSpec::Kind::BatchNorm;
  else if (kind == "relu") s.kind = LayerSpec::Kind::Relu;
  else if (kind == "maxpool") s.kind = LayerSpec::Kind::MaxPool;
  else if (kind == "residual_block") s.kind = LayerSpec::Kind::Residual;
  else if (kind == "global_avg_pool") s.kind = LayerSpec::Kind::GlobalAvgPool;
  else if (kind == "dense") s.kind = LayerSpec::Kind::Dense;
  else throw DataError("model header: unknown layer kind '" + kind + "'");
  s.in_c = j.at("in_c").get<int>();
  s.out_c = j.at("out_c").get<int>();
  s.k = j.at("k").get<int>();
  s.stride = j.at("stride").get<int>();
  s.pad = j.at("pad").get<int>();
  s.units = j.at("units").get<int>();
  return s;
}

}  // namespace detail

// Model file: magic "PFNN", u32 version=1, u32 header length, UTF-8 JSON
// header (layer specs, shapes, head, normalization), fp64 parameter blocks
// in spec order, fp64 batchnorm running stats. Little-endian throughout.
inline void save_model(Network& net, const ModelMeta& meta, const std::string& path) {
  nlohmann::json header;
  header["layers"] = nlohmann::json::array();
  for (const auto& s : net.specs()) header["layers"].push_back(detail::spec_to_json(s));
  const auto in = net.input_shape();
  header["in_shape"] = {in[0], in[1], in[2]};
  header["task"] = meta.task;
  header["head"] = meta.head;
  header["patch_size"] = meta.patch_size;
  header["patches_per_slide"] = meta.patches_per_slide;
  header["norm_mean"] = meta.norm_mean;
  header["norm_std"] = meta.norm_std;
  if (meta.survival_cutoff_days) header["survival_cutoff_days"] = *meta.survival_cutoff_days;
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out.write("PFNN", 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(htext.size()));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& p : net.params())
    for (double v : *p.data) detail::put_f64(out, v);
  for (const auto& s : net.stats())
    for (double v : *s.data) detail::put_f64(out, v);
  if (!out) throw DataError("model write failed: " + path);
}

struct LoadedModel {
  Network net;
  ModelMeta meta;
};

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "PFNN") throw DataError("bad model magic: " + path);
  if (detail::get_u32(in, path) != 1) throw DataError("unsupported model version: " + path);
  const std::uint32_t hlen = detail::get_u32(in, path);
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw DataError("truncated model file: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model header is not valid JSON: " + std::string(e.what()));
  }

  std::vector<LayerSpec> specs;
  for (const auto& j : header.at("layers")) specs.push_back(detail::spec_from_json(j));
  std::array<int, 3> in_shape{};
  for (int i = 0; i < 3; ++i) in_shape[i] = header.at("in_shape").at(i).get<int>();

  LoadedModel m{Network(specs, in_shape), ModelMeta{}};
  m.meta.task = header.at("task").get<std::string>();
  m.meta.head = header.at("head").get<std::string>();
  m.meta.patch_size = header.at("patch_size").get<int>();
  m.meta.patches_per_slide = header.at("patches_per_slide").get<int>();
  for (int i = 0; i < 3; ++i) {
    m.meta.norm_mean[i] = header.at("norm_mean").at(i).get<double>();
    m.meta.norm_std[i] = header.at("norm_std").at(i).get<double>();
  }
  if (header.contains("survival_cutoff_days"))
    m.meta.survival_cutoff_days = header.at("survival_cutoff_days").get<double>();

  std::size_t expected = 0;
  for (const auto& p : m.net.params()) expected += p.data->size();
  for (const auto& s : m.net.stats()) expected += s.data->size();

  // exact length check: header + payload and nothing else
  const auto payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto file_end = in.tellg();
  if (static_cast<std::size_t>(file_end - payload_start) != expected * 8)
    throw DataError("model payload length mismatch in " + path + " (want " +
                    std::to_string(expected * 8) + " bytes)");
  in.seekg(payload_start);

  for (auto& p : m.net.params())
    for (auto& v : *p.data) v = detail::get_f64(in, path);
  for (auto& s : m.net.stats())
    for (auto& v : *s.data) v = detail::get_f64(in, path);
  return m;
}

}  // namespace pathflow::nn
