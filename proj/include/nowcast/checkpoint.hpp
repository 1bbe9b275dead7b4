#pragma once

// Checkpoints: a binary blob of named float32 tensors plus a JSON sidecar
// {config, epoch, validation_loss, norm_max, seed, git_hash}.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/layers.hpp"

#ifndef NOWCAST_GIT_HASH
#define NOWCAST_GIT_HASH "unknown"
#endif

namespace nowcast {

inline const char* code_version() { return NOWCAST_GIT_HASH; }

namespace detail {
inline constexpr char kBlobMagic[8] = {'N', 'W', 'C', 'K', 'P', 'T', '0', '1'};

template <class V>
void put(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <class V>
V get(std::istream& in, const std::string& path) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw FormatError("truncated checkpoint", path);
  return v;
}
}  // namespace detail

/// Writes named tensors (stored as float32) to a binary blob.
template <class T>
void save_tensors(const std::filesystem::path& path, const std::vector<std::pair<std::string, const Tensor<T>*>>& tensors) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write(detail::kBlobMagic, sizeof(detail::kBlobMagic));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
      for (auto d : t->shape()) detail::put<std::int64_t>(out, d);
      std::vector<float> data(t->values().begin(), t->values().end());
      out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
  }
  std::filesystem::rename(tmp, path);
}

template <class T>
std::map<std::string, Tensor<T>> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint", path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kBlobMagic, 8) != 0)
    throw FormatError("not a checkpoint blob", path.string());
  const auto count = detail::get<std::uint32_t>(in, path.string());
  std::map<std::string, Tensor<T>> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = detail::get<std::uint32_t>(in, path.string());
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rank = detail::get<std::uint32_t>(in, path.string());
    Shape shape(rank);
    for (auto& d : shape) d = detail::get<std::int64_t>(in, path.string());
    std::vector<float> data(static_cast<std::size_t>(numel(shape)));
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float))))
      throw FormatError("truncated tensor data", name);
    out.emplace(name, Tensor<T>(shape, std::vector<T>(data.begin(), data.end())));
  }
  return out;
}

template <class T>
std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors(const ModuleState<T>& st) {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  for (const auto& p : st.params) out.emplace_back(p.name, &p.var.value());
  for (const auto& b : st.buffers) out.emplace_back(b.name, b.tensor);
  return out;
}

template <class T>
void save_state(const std::filesystem::path& path, const ModuleState<T>& st) {
  save_tensors<T>(path, named_tensors(st));
}

/// Copies every tensor of `st` from the blob; missing names or shape changes are format errors.
template <class T>
void load_state(const std::filesystem::path& path, ModuleState<T>& st) {
  auto stored = load_tensors<T>(path);
  auto assign = [&](const std::string& name, Tensor<T>& dst) {
    auto it = stored.find(name);
    if (it == stored.end()) throw FormatError("checkpoint lacks tensor", name);
    if (it->second.shape() != dst.shape())
      throw FormatError("shape " + to_string(it->second.shape()) + " != " + to_string(dst.shape()), name);
    dst = it->second;
  };
  for (auto& p : st.params) assign(p.name, p.var.mutable_value());
  for (auto& b : st.buffers) assign(b.name, *b.tensor);
}

/// In-memory copy of a module's tensors, used to keep the best epoch.
template <class T>
struct StateSnapshot {
  std::vector<Tensor<T>> tensors;

  static StateSnapshot capture(const ModuleState<T>& st) {
    StateSnapshot s;
    for (const auto& p : st.params) s.tensors.push_back(p.var.value());
    for (const auto& b : st.buffers) s.tensors.push_back(*b.tensor);
    return s;
  }
  void restore(ModuleState<T>& st) const {
    std::size_t k = 0;
    for (auto& p : st.params) p.var.mutable_value() = tensors.at(k++);
    for (auto& b : st.buffers) *b.tensor = tensors.at(k++);
  }
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open", path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), path.string());
  }
}

/// Sidecar path for a checkpoint blob: "<blob>.json".
inline std::filesystem::path sidecar_path(const std::filesystem::path& blob) { return blob.string() + ".json"; }

}  // namespace nowcast
