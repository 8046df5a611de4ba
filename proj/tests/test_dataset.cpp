#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cca/dataset.hpp"
#include "cca/error.hpp"

using namespace cca;
namespace fs = std::filesystem;

namespace {

DatasetConfig small_config() {
  DatasetConfig c;
  c.distance_count = 3;
  c.samples_per_distance = 6;
  c.test_samples_per_distance = 3;
  c.textures_per_distance = 1;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(Dataset, DistancesAreEquallySpacedInBlur) {
  const LensConfig lens;
  const auto d = blur_spaced_distances(lens, 1100.0, 2400.0, 20);
  ASSERT_EQ(d.size(), 20u);
  EXPECT_DOUBLE_EQ(d.front(), 1100.0);
  EXPECT_DOUBLE_EQ(d.back(), 2400.0);
  const double b0 = ideal_blur(lens, 1100.0).px;
  const double step = (ideal_blur(lens, 2400.0).px - b0) / 19.0;
  for (int k = 0; k < 20; ++k) EXPECT_NEAR(ideal_blur(lens, d[k]).px, b0 + k * step, 1e-9);
}

TEST(Dataset, SingleDistanceUsesNear) {
  const LensConfig lens;
  const auto d = blur_spaced_distances(lens, 1100.0, 2400.0, 1);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0], 1100.0);
  EXPECT_THROW(blur_spaced_distances(lens, 1100.0, 2400.0, 0), Error);
}

TEST(Dataset, SplitCountsAndLabels) {
  const DatasetConfig cfg = small_config();
  const Dataset ds = build_dataset(cfg);
  ASSERT_EQ(ds.manifest.distances_mm.size(), 3u);
  for (const char* name : {"train", "test", "test_saturated", "test_gray"}) ASSERT_TRUE(ds.splits.count(name)) << name;
  EXPECT_EQ(ds.splits.at("train").size(), 18u);
  EXPECT_EQ(ds.splits.at("test").size(), 9u);
  EXPECT_EQ(ds.manifest.split("train").count, 18u);
  for (const auto& s : ds.splits.at("train")) {
    EXPECT_EQ(s.side, cfg.store_side);
    EXPECT_DOUBLE_EQ(s.gt_blur.px, ideal_blur(cfg.lens, s.gt_distance_mm).px);
  }
}

TEST(Dataset, RenderIsByteDeterministic) {
  const DatasetConfig cfg = small_config();
  const auto a = encode_samples(build_dataset(cfg).splits.at("train"));
  const auto b = encode_samples(build_dataset(cfg).splits.at("train"));
  EXPECT_EQ(a, b);
}

TEST(Dataset, WriteAndLoadRoundTrip) {
  const Dataset ds = build_dataset(small_config());
  const fs::path dir = fs::temp_directory_path() / "cca_test_dataset";
  fs::remove_all(dir);
  write_dataset(ds, dir);
  const DatasetManifest m = read_manifest(dir);
  EXPECT_EQ(m.distances_mm, ds.manifest.distances_mm);
  const auto loaded = load_split(dir, "test");
  ASSERT_EQ(loaded.size(), ds.splits.at("test").size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].patch, ds.splits.at("test")[i].patch);
    EXPECT_NEAR(loaded[i].gt_blur.px, ds.splits.at("test")[i].gt_blur.px, 1e-5);
  }
  EXPECT_THROW(load_split(dir, "nope"), Error);
  fs::remove_all(dir);
}

TEST(Dataset, LabelOutliersOnlyTouchTrain) {
  DatasetConfig cfg = small_config();
  cfg.label_outlier_frac = 0.5;
  const Dataset ds = build_dataset(cfg);
  int perturbed = 0;
  for (const auto& s : ds.splits.at("train"))
    if (std::abs(s.gt_blur.px - ideal_blur(cfg.lens, s.gt_distance_mm).px) > 1e-9) ++perturbed;
  EXPECT_GT(perturbed, 0);
  for (const auto& s : ds.splits.at("test"))
    EXPECT_DOUBLE_EQ(s.gt_blur.px, ideal_blur(cfg.lens, s.gt_distance_mm).px);
}

TEST(Dataset, DecodeRejectsGarbage) {
  std::vector<std::byte> junk(8, std::byte{0});
  EXPECT_THROW(decode_samples(junk), Error);
}
