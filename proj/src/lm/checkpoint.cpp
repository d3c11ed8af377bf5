// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace metalm {

namespace {

constexpr char kMagic[4] = {'M', 'L', 'M', '1'};

std::uint64_t to_le(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(x);
  return x;
}

void write_doubles_le(std::ofstream& os, const double* p, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(p[i]));
      os.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
}

void read_doubles_le(std::ifstream& is, double* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(p[i]));
      p[i] = std::bit_cast<double>(bits);
    }
  }
}

}  // namespace

void save_container(const std::string& path, const Container& c) {
  nlohmann::json header;
  header["kind"] = c.kind;
  header["extra"] = c.extra;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : c.tensors) {
    tensors.push_back({{"name", name}, {"shape", t.shape}});
  }
  header["tensors"] = tensors;
  const std::string h = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_container: cannot open " + path);
  os.write(kMagic, 4);
  const std::uint64_t len = to_le(h.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : c.tensors) {
    write_doubles_le(os, t.data(), t.values->size());
  }
  if (!os) throw std::runtime_error("save_container: write failed for " + path);
}

Container load_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_container: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_container: " + path + " is not a metalm container");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  len = to_le(len);
  std::string h(len, '\0');
  is.read(h.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("load_container: truncated header in " + path);
  const nlohmann::json header = nlohmann::json::parse(h);

  Container c;
  c.kind = header.at("kind").get<std::string>();
  c.extra = header.value("extra", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    const std::int64_t n = numel(shape);
    std::vector<double> vals(static_cast<std::size_t>(n));
    read_doubles_le(is, vals.data(), vals.size());
    if (!is) throw std::runtime_error("load_container: truncated payload in " + path);
    c.tensors.emplace_back(name, make_tensor(shape, std::move(vals)));
  }
  return c;
}

void save_params(const std::string& path, const Params& params) {
  Container c;
  c.kind = "model";
  c.extra = {
      {"config",
       {{"vocab_size", params.config.vocab_size},
        {"d_model", params.config.d_model},
        {"n_layers", params.config.n_layers},
        {"n_heads", params.config.n_heads},
        {"max_seq", params.config.max_seq}}},
      {"seed", params.seed},
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.tensors.emplace_back(params.name(i), params.at(i).detached());
  }
  save_container(path, c);
}

Params load_params(const std::string& path) {
  const Container c = load_container(path);
  if (c.kind != "model")
    throw std::runtime_error("load_params: " + path + " holds '" + c.kind + "', not a model");
  ModelConfig cfg;
  const auto& jc = c.extra.at("config");
  cfg.vocab_size = jc.at("vocab_size").get<std::int64_t>();
  cfg.d_model = jc.at("d_model").get<std::int64_t>();
  cfg.n_layers = jc.at("n_layers").get<std::int64_t>();
  cfg.n_heads = jc.at("n_heads").get<std::int64_t>();
  cfg.max_seq = jc.at("max_seq").get<std::int64_t>();
  cfg.validate();

  Params params;
  params.config = cfg;
  params.seed = c.extra.at("seed").get<std::uint64_t>();
  const auto layout = param_layout(cfg);
  if (layout.size() != c.tensors.size())
    throw std::runtime_error("load_params: " + path + " holds " +
                             std::to_string(c.tensors.size()) + " tensors, config implies " +
                             std::to_string(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, t] = c.tensors[i];
    if (name != layout[i].first || t.shape != layout[i].second)
      throw std::runtime_error("load_params: tensor " + std::to_string(i) + " is " + name + " " +
                               shape_str(t.shape) + ", config implies " + layout[i].first + " " +
                               shape_str(layout[i].second));
    params.add(name, t);
  }
  if (!params.all_finite()) throw std::runtime_error("load_params: non-finite values in " + path);
  return params;
}

}  // namespace metalm
