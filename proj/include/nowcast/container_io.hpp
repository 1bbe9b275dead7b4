#pragma once

// HDF5 archive ingestion and the training-ready dataset container.

#include <H5Cpp.h>

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/checkpoint.hpp"
#include "nowcast/dataset_pipeline.hpp"

namespace nowcast {

struct RadarArchive {
  std::vector<RadarFrame> frames;
  Landmask landmask;
};

using IngestAdapter = std::function<RadarArchive(const std::filesystem::path&)>;

namespace detail {

inline void quiet_hdf5() {
  static const bool once = [] {
    H5::Exception::dontPrint();
    return true;
  }();
  (void)once;
}

inline H5::DataSet write_dataset(H5::Group& g, const std::string& name, const H5::PredType& type,
                                 const std::vector<hsize_t>& dims, const void* data) {
  H5::DataSpace space(static_cast<int>(dims.size()), dims.data());
  auto ds = g.createDataSet(name, type, space);
  hsize_t n = 1;
  for (auto d : dims) n *= d;
  if (n > 0) ds.write(data, type);
  return ds;
}

inline std::vector<hsize_t> dataset_dims(const H5::DataSet& ds) {
  const auto space = ds.getSpace();
  std::vector<hsize_t> dims(static_cast<std::size_t>(space.getSimpleExtentNdims()));
  if (!dims.empty()) space.getSimpleExtentDims(dims.data());
  return dims;
}

template <class V>
std::vector<V> read_dataset(const H5::Group& g, const std::string& name, const H5::PredType& type,
                            std::vector<hsize_t>& dims, const std::string& node) {
  if (!g.nameExists(name)) throw FormatError("missing dataset", node);
  try {
    auto ds = g.openDataSet(name);
    dims = dataset_dims(ds);
    hsize_t n = 1;
    for (auto d : dims) n *= d;
    std::vector<V> out(static_cast<std::size_t>(n));
    if (n > 0) ds.read(out.data(), type);
    return out;
  } catch (const H5::Exception& e) {
    throw FormatError("unreadable dataset: " + e.getDetailMsg(), node);
  }
}

inline void write_attribute(H5::H5Object& obj, const std::string& name, const H5::PredType& type,
                            const std::vector<hsize_t>& dims, const void* data) {
  H5::DataSpace space = dims.empty() ? H5::DataSpace(H5S_SCALAR) : H5::DataSpace(int(dims.size()), dims.data());
  obj.createAttribute(name, type, space).write(type, data);
}

template <class V>
std::vector<V> read_attribute(const H5::H5Object& obj, const std::string& name, const H5::PredType& type,
                              std::size_t expected, const std::string& node) {
  if (!obj.attrExists(name)) throw FormatError("missing attribute", node);
  try {
    auto attr = obj.openAttribute(name);
    const auto n = static_cast<std::size_t>(attr.getSpace().getSimpleExtentNpoints());
    if (n != expected) throw FormatError("attribute has " + std::to_string(n) + " elements", node);
    std::vector<V> out(n);
    attr.read(type, out.data());
    return out;
  } catch (const H5::Exception& e) {
    throw FormatError("unreadable attribute: " + e.getDetailMsg(), node);
  }
}

inline void write_string_attribute(H5::H5Object& obj, const std::string& name, const std::string& value) {
  H5::StrType type(H5::PredType::C_S1, H5T_VARIABLE);
  obj.createAttribute(name, type, H5::DataSpace(H5S_SCALAR)).write(type, value);
}

inline std::string read_string_attribute(const H5::H5Object& obj, const std::string& name, const std::string& node) {
  if (!obj.attrExists(name)) throw FormatError("missing attribute", node);
  try {
    auto attr = obj.openAttribute(name);
    std::string value;
    attr.read(attr.getStrType(), value);
    return value;
  } catch (const H5::Exception& e) {
    throw FormatError("unreadable attribute: " + e.getDetailMsg(), node);
  }
}

/// Generic layout: /frames (N,H,W) integers, /timestamps (N) epoch seconds, optional /landmask (H,W).
inline RadarArchive read_generic_h5(const std::filesystem::path& path) {
  quiet_hdf5();
  if (!std::filesystem::is_regular_file(path)) throw IngestionError("archive not found", path.string());
  H5::H5File file;
  try {
    file.openFile(path.string(), H5F_ACC_RDONLY);
  } catch (const H5::Exception&) {
    throw IngestionError("cannot open archive", path.string());
  }
  RadarArchive out;
  try {
    std::vector<hsize_t> fdims, tdims, mdims;
    auto values = read_dataset<std::int32_t>(file, "frames", H5::PredType::NATIVE_INT32, fdims, "/frames");
    auto stamps = read_dataset<std::int64_t>(file, "timestamps", H5::PredType::NATIVE_INT64, tdims, "/timestamps");
    if (fdims.size() != 3 || tdims.size() != 1 || tdims[0] != fdims[0])
      throw IngestionError("frames must be (N,H,W) with N timestamps", path.string());
    const int rows = int(fdims[1]), cols = int(fdims[2]);
    if (file.nameExists("landmask")) {
      auto cells = read_dataset<std::uint8_t>(file, "landmask", H5::PredType::NATIVE_UINT8, mdims, "/landmask");
      if (mdims.size() != 2 || int(mdims[0]) != rows || int(mdims[1]) != cols)
        throw IngestionError("landmask shape differs from the frame grid", path.string());
      for (auto& c : cells) c = c ? 1 : 0;
      out.landmask = {rows, cols, std::move(cells)};
    } else {
      out.landmask = Landmask::full(rows, cols);
    }
    const std::size_t P = std::size_t(rows) * cols;
    out.frames.resize(fdims[0]);
    for (std::size_t j = 0; j < out.frames.size(); ++j) {
      auto& f = out.frames[j];
      f.timestamp = from_epoch_seconds(stamps[j]);
      f.rows = rows;
      f.cols = cols;
      f.values.assign(values.begin() + std::ptrdiff_t(j * P), values.begin() + std::ptrdiff_t((j + 1) * P));
      for (auto& v : f.values)
        if (v < 0) v = 0;  // negative sentinels carry no rain
      apply_landmask(f, out.landmask);
      if (j > 0 && f.timestamp <= out.frames[j - 1].timestamp)
        throw OrderingError("timestamps are not strictly increasing at frame " + std::to_string(j) + " of " + path.string());
    }
  } catch (const FormatError& e) {
    throw IngestionError(e.what(), path.string());
  }
  return out;
}

}  // namespace detail

inline std::map<std::string, IngestAdapter>& ingest_adapters() {
  static std::map<std::string, IngestAdapter> registry{{"generic-h5", detail::read_generic_h5}};
  return registry;
}

inline void register_ingest_adapter(const std::string& schema, IngestAdapter adapter) {
  ingest_adapters()[schema] = std::move(adapter);
}

/// Frames in strictly increasing time order with off-land pixels zeroed.
inline RadarArchive ingest_archive(const std::filesystem::path& path, const std::string& schema = "generic-h5") {
  const auto& reg = ingest_adapters();
  const auto it = reg.find(schema);
  if (it == reg.end()) throw ConfigError("unknown ingestion schema '" + schema + "'", "schema");
  return it->second(path);
}

/// Writes frames in the generic layout read by the "generic-h5" adapter.
inline void write_archive(const std::filesystem::path& path, const std::vector<RadarFrame>& frames, const Landmask& landmask) {
  detail::quiet_hdf5();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const int rows = landmask.rows, cols = landmask.cols;
  const std::size_t P = std::size_t(rows) * cols;
  std::vector<std::int32_t> values;
  values.reserve(frames.size() * P);
  std::vector<std::int64_t> stamps;
  for (const auto& f : frames) {
    if (f.rows != rows || f.cols != cols) throw ShapeError("write_archive: frame grid differs from the landmask");
    values.insert(values.end(), f.values.begin(), f.values.end());
    stamps.push_back(to_epoch_seconds(f.timestamp));
  }
  H5::H5File file(path.string(), H5F_ACC_TRUNC);
  detail::write_dataset(file, "frames", H5::PredType::NATIVE_INT32, {frames.size(), hsize_t(rows), hsize_t(cols)}, values.data());
  detail::write_dataset(file, "timestamps", H5::PredType::NATIVE_INT64, {stamps.size()}, stamps.data());
  detail::write_dataset(file, "landmask", H5::PredType::NATIVE_UINT8, {hsize_t(rows), hsize_t(cols)}, landmask.cells.data());
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

namespace detail {

inline void write_split(H5::H5File& file, const std::string& name, const std::vector<Sample>& samples) {
  auto g = file.createGroup("/" + name);
  const hsize_t n = samples.size();
  constexpr std::size_t XY = kInputFrames * kCropSize * kCropSize, M = kMaskCount * kCropSize * kCropSize;
  std::vector<float> x(n * XY), y(n * XY);
  std::vector<std::uint8_t> m(n * M);
  std::vector<std::int64_t> t0(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(samples[i].x.values().begin(), samples[i].x.values().end(), x.begin() + std::ptrdiff_t(i * XY));
    std::copy(samples[i].y.values().begin(), samples[i].y.values().end(), y.begin() + std::ptrdiff_t(i * XY));
    std::copy(samples[i].m.values().begin(), samples[i].m.values().end(), m.begin() + std::ptrdiff_t(i * M));
    t0[i] = to_epoch_seconds(samples[i].t0);
  }
  write_dataset(g, "x", H5::PredType::NATIVE_FLOAT, {n, kInputFrames, kCropSize, kCropSize}, x.data());
  write_dataset(g, "m", H5::PredType::NATIVE_UINT8, {n, kMaskCount, kCropSize, kCropSize}, m.data());
  write_dataset(g, "y", H5::PredType::NATIVE_FLOAT, {n, kOutputFrames, kCropSize, kCropSize}, y.data());
  write_dataset(g, "t0", H5::PredType::NATIVE_INT64, {n}, t0.data());
}

inline std::vector<Sample> read_split(const H5::H5File& file, const std::string& name) {
  const std::string node = "/" + name;
  if (!file.nameExists(name)) throw FormatError("missing group", node);
  H5::Group g;
  try {
    g = file.openGroup(name);
  } catch (const H5::Exception& e) {
    throw FormatError("unreadable group: " + e.getDetailMsg(), node);
  }
  std::vector<hsize_t> xd, md, yd, td;
  auto x = read_dataset<float>(g, "x", H5::PredType::NATIVE_FLOAT, xd, node + "/x");
  auto m = read_dataset<std::uint8_t>(g, "m", H5::PredType::NATIVE_UINT8, md, node + "/m");
  auto y = read_dataset<float>(g, "y", H5::PredType::NATIVE_FLOAT, yd, node + "/y");
  auto t0 = read_dataset<std::int64_t>(g, "t0", H5::PredType::NATIVE_INT64, td, node + "/t0");
  auto expect = [&](const std::vector<hsize_t>& d, std::vector<hsize_t> want, const std::string& ds) {
    if (d != want) throw FormatError("unexpected shape", node + "/" + ds);
  };
  if (td.size() != 1) throw FormatError("unexpected shape", node + "/t0");
  const hsize_t n = td[0];
  expect(xd, {n, kInputFrames, kCropSize, kCropSize}, "x");
  expect(md, {n, kMaskCount, kCropSize, kCropSize}, "m");
  expect(yd, {n, kOutputFrames, kCropSize, kCropSize}, "y");
  constexpr std::size_t XY = kInputFrames * kCropSize * kCropSize, M = kMaskCount * kCropSize * kCropSize;
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.begin() + std::ptrdiff_t(i * XY), XY, out[i].x.data());
    std::copy_n(y.begin() + std::ptrdiff_t(i * XY), XY, out[i].y.data());
    std::copy_n(m.begin() + std::ptrdiff_t(i * M), M, out[i].m.data());
    out[i].t0 = from_epoch_seconds(t0[i]);
  }
  return out;
}

}  // namespace detail

/// Writes atomically (temporary file, then rename).
inline void write_container(const std::filesystem::path& path, const DatasetContainer& c) {
  detail::quiet_hdf5();
  if (!(c.norm_max > 0)) throw ConfigError("container norm_max must be positive", "norm_max");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    H5::H5File file(tmp.string(), H5F_ACC_TRUNC);
    detail::write_split(file, "train", c.train);
    detail::write_split(file, "test", c.test);
    const double norm_max = c.norm_max;
    const std::int32_t origin[2] = {c.crop.origin_row, c.crop.origin_col};
    const std::int32_t version = c.schema_version;
    detail::write_attribute(file, "norm_max", H5::PredType::NATIVE_DOUBLE, {}, &norm_max);
    detail::write_attribute(file, "crop_origin", H5::PredType::NATIVE_INT32, {2}, origin);
    detail::write_attribute(file, "landmask64", H5::PredType::NATIVE_UINT8, {kCropSize, kCropSize}, c.landmask64.cells.data());
    detail::write_attribute(file, "schema_version", H5::PredType::NATIVE_INT32, {}, &version);
    detail::write_string_attribute(file, "provenance", nlohmann::json(c.metadata).dump());
  }
  std::filesystem::rename(tmp, path);
}

inline DatasetContainer read_container(const std::filesystem::path& path) {
  detail::quiet_hdf5();
  H5::H5File file;
  try {
    file.openFile(path.string(), H5F_ACC_RDONLY);
  } catch (const H5::Exception&) {
    throw FormatError("cannot open container " + path.string(), "/");
  }
  DatasetContainer c;
  c.schema_version = detail::read_attribute<std::int32_t>(file, "schema_version", H5::PredType::NATIVE_INT32, 1, "/@schema_version")[0];
  if (c.schema_version != kContainerSchemaVersion)
    throw FormatError("unsupported schema version " + std::to_string(c.schema_version), "/@schema_version");
  c.norm_max = detail::read_attribute<double>(file, "norm_max", H5::PredType::NATIVE_DOUBLE, 1, "/@norm_max")[0];
  if (!(c.norm_max > 0)) throw FormatError("norm_max must be positive", "/@norm_max");
  const auto origin = detail::read_attribute<std::int32_t>(file, "crop_origin", H5::PredType::NATIVE_INT32, 2, "/@crop_origin");
  c.crop = {origin[0], origin[1]};
  c.landmask64 = {kCropSize, kCropSize,
                  detail::read_attribute<std::uint8_t>(file, "landmask64", H5::PredType::NATIVE_UINT8,
                                                       kCropSize * kCropSize, "/@landmask64")};
  const auto prov = detail::read_string_attribute(file, "provenance", "/@provenance");
  try {
    c.metadata = nlohmann::json::parse(prov).get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("provenance is not a JSON string map", "/@provenance");
  }
  c.train = detail::read_split(file, "train");
  c.test = detail::read_split(file, "test");
  return c;
}

// ---------------------------------------------------------------------------
// QC report
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const QCReport& qc) {
  nlohmann::json rules = nlohmann::json::array(), windows = nlohmann::json::array();
  for (const auto& r : qc.rules) rules.push_back({{"rule", r.rule}, {"threshold", r.threshold}, {"count", r.count}});
  for (const auto& w : qc.windows_flagged)
    windows.push_back({{"row", w.row},
                       {"col", w.col},
                       {"rule", w.rule},
                       {"start", format_timestamp(w.start)},
                       {"end", format_timestamp(w.end)},
                       {"sum", w.sum}});
  return {{"pixels_zeroed", qc.pixels_zeroed}, {"rules", rules}, {"windows_flagged", windows}};
}

/// Named float arrays in one HDF5 file (predictions, uncertainty maps, heatmaps). An optional
/// per-sample `t0` dataset holds seconds since the epoch.
inline void write_arrays(const std::filesystem::path& path, const std::vector<std::pair<std::string, Tensor<float>>>& arrays,
                         const std::vector<Timestamp>& t0 = {}) {
  detail::quiet_hdf5();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  H5::H5File file(path.string(), H5F_ACC_TRUNC);
  for (const auto& [name, t] : arrays) {
    std::vector<hsize_t> dims(t.shape().begin(), t.shape().end());
    detail::write_dataset(file, name, H5::PredType::NATIVE_FLOAT, dims, t.data());
  }
  if (!t0.empty()) {
    std::vector<std::int64_t> secs;
    for (auto t : t0) secs.push_back(t.time_since_epoch().count());
    detail::write_dataset(file, "t0", H5::PredType::NATIVE_INT64, {secs.size()}, secs.data());
  }
  detail::write_string_attribute(file, "code_version", code_version());
}

inline Tensor<float> read_array(const std::filesystem::path& path, const std::string& name) {
  detail::quiet_hdf5();
  try {
    H5::H5File file(path.string(), H5F_ACC_RDONLY);
    std::vector<hsize_t> dims;
    auto values = detail::read_dataset<float>(file, name, H5::PredType::NATIVE_FLOAT, dims, "/" + name);
    return Tensor<float>(Shape(dims.begin(), dims.end()), std::move(values));
  } catch (const H5::Exception&) {
    throw FormatError("cannot read " + path.string(), "/");
  }
}

}  // namespace nowcast
