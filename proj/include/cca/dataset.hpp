#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cca/optics.hpp"
#include "cca/render.hpp"
#include "cca/texture.hpp"

namespace cca {

class Config;

struct DatasetConfig {
  LensConfig lens;
  AberrationField aberration;
  RenderOptions render;
  double grad_threshold = 0.02;
  double near_mm = 1100.0;
  double far_mm = 2400.0;
  int distance_count = 20;
  int samples_per_distance = 250;
  int test_samples_per_distance = 50;
  int textures_per_distance = 4;
  std::string texture_dir;
  Palette palette = Palette::Mixed;
  bool color_splits = true;
  int store_side = 20;
  bool texture_jitter = true;
  double label_outlier_frac = 0.0;
  double label_outlier_min_px = 4.0;
  double label_outlier_max_px = 8.0;
  std::uint64_t seed = 1;
  int workers = 1;
};

DatasetConfig dataset_config_from(const Config& cfg);

/// Distances whose ideal signed blur is equally spaced between blur(near)
/// and blur(far). A single position uses `near`.
std::vector<double> blur_spaced_distances(const LensConfig& lens, double near_mm, double far_mm,
                                          int count);

struct SplitRecord {
  std::string name;
  std::string file;
  std::size_t count = 0;
  std::vector<std::size_t> per_distance;
  bool shortfall = false;
};

struct DatasetManifest {
  DatasetConfig config;
  std::vector<double> distances_mm;
  std::vector<double> blurs_px;
  std::vector<SplitRecord> splits;

  const SplitRecord& split(const std::string& name) const;
};

struct Dataset {
  DatasetManifest manifest;
  std::map<std::string, std::vector<PatchSample>> splits;
};

/// Renders every split in memory. Splits draw from disjoint texture streams.
Dataset build_dataset(const DatasetConfig& cfg);

/// Writes <split>.ccad for every split plus manifest.json.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
DatasetManifest read_manifest(const std::filesystem::path& dir);
std::vector<PatchSample> load_split(const std::filesystem::path& dir, const std::string& split);

/// Sample file: "CCAD", u32 version, u32 count, u32 side, then per sample
/// 3*side*side float32 planes, float32 pos x/y, float32 distance_mm, float32 blur_px.
std::vector<std::byte> encode_samples(const std::vector<PatchSample>& samples);
std::vector<PatchSample> decode_samples(std::span<const std::byte> bytes);

}  // namespace cca
