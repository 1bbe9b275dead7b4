#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "nowcast/container_io.hpp"
#include "nowcast/synthetic_storms.hpp"
#include "test_support.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("nowcast_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

StormArchive tiny_archive(int n = 24) {
  StormConfig cfg;
  cfg.seed = 2;
  cfg.n_frames = n;
  cfg.rows = cfg.cols = 64;
  cfg.land_radius = 25;
  return gen_storm_archive(cfg);
}

DatasetContainer small_container(std::size_t n_train, std::size_t n_test) {
  Rng rng(4);
  auto samples = nowcast::testing::random_samples(n_train + n_test, rng);
  DatasetContainer c;
  c.train.assign(samples.begin(), samples.begin() + std::ptrdiff_t(n_train));
  c.test.assign(samples.begin() + std::ptrdiff_t(n_train), samples.end());
  c.norm_max = 4321;
  c.crop = {12, 34};
  for (std::size_t p = 0; p < c.landmask64.cells.size(); p += 3) c.landmask64.cells[p] = 0;
  c.metadata = {{"source", "unit test"}, {"seed", "4"}};
  return c;
}

}  // namespace

TEST(Ingest, SyntheticArchiveRoundtrip) {
  auto a = tiny_archive();
  const auto path = scratch("archive.h5");
  write_archive(path, a.frames, a.landmask);
  auto back = ingest_archive(path);
  ASSERT_EQ(back.frames.size(), 24u);
  EXPECT_EQ(back.landmask, a.landmask);
  for (std::size_t j = 0; j < 24; ++j) {
    EXPECT_EQ(back.frames[j].timestamp, a.frames[j].timestamp);
    EXPECT_EQ(back.frames[j].values, a.frames[j].values);
    if (j) EXPECT_EQ(back.frames[j].timestamp - back.frames[j - 1].timestamp, kFrameStep);
  }
}

TEST(Ingest, OffLandPixelsAreForcedToZero) {
  auto a = tiny_archive(1);
  ASSERT_FALSE(a.landmask.cells[0]);
  a.frames[0].values[0] = 7;
  const auto path = scratch("offland.h5");
  write_archive(path, a.frames, a.landmask);
  auto back = ingest_archive(path);
  EXPECT_EQ(back.frames[0].values[0], 0);
  std::int64_t off = 0;
  for (std::size_t p = 0; p < a.landmask.cells.size(); ++p)
    if (!a.landmask.cells[p]) off += back.frames[0].values[p];
  EXPECT_EQ(off, 0);
}

TEST(Ingest, ShuffledTimestampsAreAnOrderingError) {
  auto a = tiny_archive(5);
  std::swap(a.frames[1].timestamp, a.frames[3].timestamp);
  const auto path = scratch("shuffled.h5");
  write_archive(path, a.frames, a.landmask);
  EXPECT_THROW(ingest_archive(path), OrderingError);
}

TEST(Ingest, UnreadableFilesNameThePath) {
  const auto missing = scratch("does_not_exist.h5");
  try {
    ingest_archive(missing);
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.path(), missing.string());
  }
  const auto junk = scratch("junk.h5");
  std::ofstream(junk) << "not hdf5";
  EXPECT_THROW(ingest_archive(junk), IngestionError);
  EXPECT_THROW(ingest_archive(junk, "no-such-schema"), ConfigError);
}

TEST(Ingest, CustomAdaptersCanBeRegistered) {
  register_ingest_adapter("constant", [](const fs::path&) {
    RadarArchive a;
    a.landmask = Landmask::full(2, 2);
    a.frames.push_back({from_epoch_seconds(0), 2, 2, {1, 2, 3, 4}});
    return a;
  });
  EXPECT_EQ(ingest_archive("ignored", "constant").frames.at(0).values[3], 4);
}

TEST(Container, RoundtripIsLossless) {
  auto c = small_container(10, 3);
  const auto path = scratch("container.h5");
  write_container(path, c);
  auto back = read_container(path);
  ASSERT_EQ(back.train.size(), 10u);
  ASSERT_EQ(back.test.size(), 3u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(back.train[i].x, c.train[i].x);
    EXPECT_EQ(back.train[i].m, c.train[i].m);
    EXPECT_EQ(back.train[i].y, c.train[i].y);
    EXPECT_EQ(back.train[i].t0, c.train[i].t0);
  }
  EXPECT_EQ(back.test[2].y, c.test[2].y);
  EXPECT_EQ(back.norm_max, c.norm_max);
  EXPECT_EQ(back.crop, c.crop);
  EXPECT_EQ(back.landmask64, c.landmask64);
  EXPECT_EQ(back.metadata, c.metadata);
  EXPECT_EQ(back.schema_version, kContainerSchemaVersion);
}

TEST(Container, EmptySplitsRoundtrip) {
  auto c = small_container(2, 0);
  const auto path = scratch("empty_test.h5");
  write_container(path, c);
  auto back = read_container(path);
  EXPECT_EQ(back.train.size(), 2u);
  EXPECT_TRUE(back.test.empty());
}

TEST(Container, MissingNormMaxIsAFormatError) {
  auto c = small_container(1, 1);
  const auto path = scratch("no_norm.h5");
  write_container(path, c);
  {
    H5::H5File f(path.string(), H5F_ACC_RDWR);
    f.removeAttr("norm_max");
  }
  try {
    read_container(path);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.node(), "/@norm_max");
  }
}

TEST(Container, MissingDatasetNamesTheNode) {
  auto c = small_container(1, 1);
  const auto path = scratch("no_y.h5");
  write_container(path, c);
  {
    H5::H5File f(path.string(), H5F_ACC_RDWR);
    f.unlink("/test/y");
  }
  try {
    read_container(path);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.node(), "/test/y");
  }
  EXPECT_THROW(read_container(scratch("absent.h5")), FormatError);
}

TEST(Container, RejectsNonPositiveNormMax) {
  auto c = small_container(1, 0);
  c.norm_max = 0;
  EXPECT_THROW(write_container(scratch("zero.h5"), c), ConfigError);
}

TEST(QcReport, SerialisesRulesAndWindows) {
  QCReport qc;
  qc.pixels_zeroed = 3;
  qc.rules = {{"year_sum", 130000, 0}, {"day_sum", 17400, 1}};
  qc.windows_flagged.push_back({1, 2, "day_sum", from_epoch_seconds(0), from_epoch_seconds(600), 20000});
  auto j = to_json(qc);
  EXPECT_EQ(j["pixels_zeroed"], 3);
  EXPECT_EQ(j["rules"][1]["count"], 1);
  EXPECT_EQ(j["windows_flagged"][0]["end"], "1970-01-01T00:10:00Z");
}
