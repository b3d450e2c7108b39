#pragma once

// Checkpoint layout:
//
//   optmarl-checkpoint 1
//   entries <N>
//   <name> <rows> <cols>        (N lines)
//   data
//   <raw bytes>
//
// The raw section holds every entry in manifest order, each matrix row-major,
// as little-endian IEEE-754 binary64.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "optmarl/diffcore/graph.hpp"
#include "optmarl/errors.hpp"

namespace optmarl::networks {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using NamedArrays = std::map<std::string, diffcore::Matrix>;

/// Collects the values of `store` under `prefix` + name.
inline void export_store(NamedArrays& out, const diffcore::ParameterStore& store, const std::string& prefix) {
  for (const auto& [name, p] : store) out[prefix + name] = p.value;
}

/// Copies arrays named `prefix` + name into `store`; every entry must exist
/// with a matching shape.
inline void import_store(diffcore::ParameterStore& store, const NamedArrays& arrays, const std::string& prefix) {
  for (auto& [name, p] : store) {
    auto it = arrays.find(prefix + name);
    if (it == arrays.end()) throw ConfigError("checkpoint is missing " + prefix + name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw ConfigError("checkpoint shape mismatch for " + prefix + name);
    p.value = it->second;
  }
}

inline void save_checkpoint(const std::string& path, const NamedArrays& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << "optmarl-checkpoint 1\nentries " << arrays.size() << "\n";
  for (const auto& [name, m] : arrays) {
    if (name.find_first_of(" \t\n") != std::string::npos) throw ConfigError("checkpoint names must not contain spaces");
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  }
  out << "data\n";
  for (const auto& [name, m] : arrays) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        out.write(bytes, sizeof bytes);
      }
  }
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

inline NamedArrays load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "optmarl-checkpoint 1") throw ConfigError("not a checkpoint: " + path);
  std::size_t count = 0;
  {
    std::getline(in, line);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> count) || tag != "entries") throw ConfigError("malformed checkpoint header: " + path);
  }
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    std::getline(in, line);
    std::istringstream ss(line);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(ss >> name >> rows >> cols) || rows < 0 || cols < 0)
      throw ConfigError("malformed checkpoint manifest line: " + line);
    manifest.push_back({name, {rows, cols}});
  }
  if (!std::getline(in, line) || line != "data") throw ConfigError("checkpoint manifest not terminated: " + path);
  NamedArrays out;
  for (const auto& [name, shape] : manifest) {
    diffcore::Matrix m(shape.first, shape.second);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        char bytes[sizeof(double)];
        if (!in.read(bytes, sizeof bytes)) throw ConfigError("truncated checkpoint: " + path);
        double v = 0.0;
        std::memcpy(&v, bytes, sizeof v);
        m(r, c) = v;
      }
    out.emplace(name, std::move(m));
  }
  return out;
}

}  // namespace optmarl::networks
