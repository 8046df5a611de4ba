#include "cca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "cca/config.hpp"
#include "cca/error.hpp"
#include "cca/parallel.hpp"
#include "cca/rng.hpp"

namespace cca {

namespace {

constexpr std::uint32_t kSampleVersion = 1;

struct SplitPlan {
  std::string name;
  std::uint64_t stream;
  Palette palette;
  int per_distance;
};

std::vector<std::filesystem::path> list_textures(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(ErrorKind::Io, "texture directory '" + dir + "' is not readable");
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::Io, "no .ppm textures in '" + dir + "'");
  return files;
}

}  // namespace

DatasetConfig dataset_config_from(const Config& cfg) {
  DatasetConfig d;
  d.lens = lens_from_config(cfg);
  d.aberration = aberration_from_config(cfg);
  d.render.block_size = cfg.get_int("block_size");
  d.render.noise_sigma = cfg.get_double("noise_sigma");
  d.grad_threshold = cfg.get_double("grad_threshold");
  d.near_mm = cfg.get_double("near_mm");
  d.far_mm = cfg.get_double("far_mm");
  d.distance_count = cfg.get_int("distance_count");
  d.samples_per_distance = cfg.get_int("samples_per_distance");
  d.test_samples_per_distance = cfg.get_int("test_samples_per_distance");
  d.textures_per_distance = cfg.get_int("textures_per_distance");
  d.texture_dir = cfg.get("texture_dir");
  d.palette = parse_palette(cfg.get("texture_color"));
  d.color_splits = cfg.get_bool("color_splits");
  d.store_side = cfg.get_int("store_side");
  d.texture_jitter = cfg.get_bool("texture_jitter");
  d.label_outlier_frac = cfg.get_double("label_outlier_frac");
  d.label_outlier_min_px = cfg.get_double("label_outlier_min_px");
  d.label_outlier_max_px = cfg.get_double("label_outlier_max_px");
  d.seed = cfg.get_u64("seed");
  d.workers = cfg.get_int("workers");
  if (d.distance_count < 1) throw Error(ErrorKind::Config, "distance_count must be >= 1");
  if (d.textures_per_distance < 1) throw Error(ErrorKind::Config, "textures_per_distance must be >= 1");
  if (d.store_side < 16) throw Error(ErrorKind::Config, "store_side must be >= 16");
  return d;
}

std::vector<double> blur_spaced_distances(const LensConfig& lens, double near_mm, double far_mm,
                                          int count) {
  if (count < 1) throw Error(ErrorKind::Config, "distance count must be >= 1");
  const double b_near = ideal_blur(lens, near_mm).px;
  const double b_far = ideal_blur(lens, far_mm).px;
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    if (k == 0) {
      out.push_back(near_mm);
    } else if (k == count - 1) {
      out.push_back(far_mm);
    } else {
      const double b = b_near + (b_far - b_near) * k / (count - 1);
      out.push_back(distance_from_blur(lens, {b}));
    }
  }
  return out;
}

const SplitRecord& DatasetManifest::split(const std::string& name) const {
  for (const auto& s : splits)
    if (s.name == name) return s;
  throw Error(ErrorKind::Io, "dataset has no split '" + name + "'");
}

Dataset build_dataset(const DatasetConfig& cfg) {
  cfg.lens.validate();
  Dataset ds;
  ds.manifest.config = cfg;
  ds.manifest.distances_mm = blur_spaced_distances(cfg.lens, cfg.near_mm, cfg.far_mm, cfg.distance_count);
  for (double u : ds.manifest.distances_mm) ds.manifest.blurs_px.push_back(ideal_blur(cfg.lens, u).px);

  std::vector<std::filesystem::path> user_textures;
  if (!cfg.texture_dir.empty()) user_textures = list_textures(cfg.texture_dir);

  std::vector<SplitPlan> plans = {{"train", 0, cfg.palette, cfg.samples_per_distance},
                                  {"test", 1, cfg.palette, cfg.test_samples_per_distance}};
  if (cfg.color_splits) {
    plans.push_back({"test_saturated", 2, Palette::Saturated, cfg.test_samples_per_distance});
    plans.push_back({"test_gray", 3, Palette::Gray, cfg.test_samples_per_distance});
  }

  const int W = cfg.lens.sensor_width;
  const int H = cfg.lens.sensor_height;
  const int T = cfg.textures_per_distance;
  const auto D = static_cast<std::size_t>(cfg.distance_count);

  for (const SplitPlan& plan : plans) {
    // user textures: every fourth file is held out for the test split
    std::vector<std::filesystem::path> pool;
    for (std::size_t i = 0; i < user_textures.size(); ++i)
      if ((plan.name == "train") == (i % 4 != 3)) pool.push_back(user_textures[i]);
    const bool use_user = !pool.empty() && plan.stream <= 1;

    std::vector<std::vector<PatchSample>> per_distance(D);
    std::vector<char> shortfall(D, 0);
    parallel_for(D, cfg.workers, [&](std::size_t k) {
      const double u = ds.manifest.distances_mm[k];
      const auto quota = static_cast<std::size_t>(std::max(plan.per_distance, 0));
      std::vector<PatchSample>& out = per_distance[k];
      const std::size_t per_texture = (quota + T - 1) / T;
      // extra textures make up for sparse ones
      for (int t = 0; t < 4 * T && out.size() < quota; ++t) {
        const std::uint64_t tex_seed = derive_seed(cfg.seed, 100 + plan.stream, k * 1000 + t);
        Rng rng(tex_seed);
        RgbImage source = use_user ? read_ppm(pool[(k * T + t) % pool.size()])
                                   : procedural_texture(W, H, plan.palette, rng);
        RgbImage texture = jitter_texture(source, W, H, rng, cfg.texture_jitter);
        RenderOptions ro = cfg.render;
        ro.noise_seed = derive_seed(tex_seed, 1);
        const RgbImage img = render_flat(texture, u, cfg.lens, cfg.aberration, ro);
        const std::size_t want = std::min(per_texture, quota - out.size());
        Extraction ex = extract_patches(img, u, cfg.lens, cfg.grad_threshold, want,
                                        derive_seed(tex_seed, 2), cfg.store_side);
        for (auto& s : ex.samples) out.push_back(std::move(s));
      }
      shortfall[k] = out.size() < quota;
    });

    SplitRecord rec;
    rec.name = plan.name;
    rec.file = plan.name + ".ccad";
    std::vector<PatchSample>& merged = ds.splits[plan.name];
    for (std::size_t k = 0; k < D; ++k) {
      rec.per_distance.push_back(per_distance[k].size());
      rec.shortfall = rec.shortfall || shortfall[k];
      for (auto& s : per_distance[k]) merged.push_back(std::move(s));
    }
    rec.count = merged.size();

    if (plan.name == "train" && cfg.label_outlier_frac > 0.0) {
      Rng rng(derive_seed(cfg.seed, 999));
      for (PatchSample& s : merged)
        if (rng.bernoulli(cfg.label_outlier_frac)) {
          const double mag = rng.uniform(cfg.label_outlier_min_px, cfg.label_outlier_max_px);
          s.gt_blur.px += rng.bernoulli(0.5) ? mag : -mag;
        }
    }
    ds.manifest.splits.push_back(std::move(rec));
  }
  return ds;
}

std::vector<std::byte> encode_samples(const std::vector<PatchSample>& samples) {
  std::vector<std::byte> out;
  for (char ch : std::string("CCAD")) out.push_back(static_cast<std::byte>(ch));
  const std::uint32_t side = samples.empty() ? 16u : static_cast<std::uint32_t>(samples.front().side);
  le::put_u32(out, kSampleVersion);
  le::put_u32(out, static_cast<std::uint32_t>(samples.size()));
  le::put_u32(out, side);
  out.reserve(out.size() + samples.size() * (3 * side * side + 4) * 4);
  for (const PatchSample& s : samples) {
    if (static_cast<std::uint32_t>(s.side) != side)
      throw Error(ErrorKind::Shape, "samples in one file must share the patch side");
    for (float v : s.patch) le::put_f32(out, v);
    le::put_f32(out, static_cast<float>(s.pos.x));
    le::put_f32(out, static_cast<float>(s.pos.y));
    le::put_f32(out, static_cast<float>(s.gt_distance_mm));
    le::put_f32(out, static_cast<float>(s.gt_blur.px));
  }
  return out;
}

std::vector<PatchSample> decode_samples(std::span<const std::byte> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "CCAD", 4) != 0)
    throw Error(ErrorKind::Io, "not a CCAD sample file");
  std::size_t pos = 4;
  const std::uint32_t version = le::get_u32(bytes, pos);
  if (version != kSampleVersion) throw Error(ErrorKind::Io, "unsupported CCAD version");
  const std::uint32_t count = le::get_u32(bytes, pos);
  const std::uint32_t side = le::get_u32(bytes, pos);
  const std::size_t record = (3ull * side * side + 4) * 4;
  if (bytes.size() != 16 + record * count) throw Error(ErrorKind::Io, "CCAD size does not match header");
  std::vector<PatchSample> out(count);
  for (PatchSample& s : out) {
    s.side = static_cast<int>(side);
    s.patch.resize(3ull * side * side);
    for (float& v : s.patch) v = le::get_f32(bytes, pos);
    s.pos.x = le::get_f32(bytes, pos);
    s.pos.y = le::get_f32(bytes, pos);
    s.gt_distance_mm = le::get_f32(bytes, pos);
    s.gt_blur.px = le::get_f32(bytes, pos);
  }
  return out;
}

namespace {

nlohmann::ordered_json config_json(const DatasetConfig& c) {
  nlohmann::ordered_json j;
  j["focal_length_mm"] = c.lens.focal_length_mm;
  j["f_number"] = c.lens.f_number;
  j["focus_distance_mm"] = c.lens.focus_distance_mm;
  j["pixel_pitch_mm"] = c.lens.pixel_pitch_mm;
  j["sensor_width"] = c.lens.sensor_width;
  j["sensor_height"] = c.lens.sensor_height;
  j["sigma_per_px"] = c.lens.sigma_per_px;
  j["fc_coeff"] = c.aberration.field_curvature;
  j["coma_coeff"] = c.aberration.coma;
  j["chroma_r"] = c.aberration.lateral_chromatic[0];
  j["chroma_g"] = c.aberration.lateral_chromatic[1];
  j["chroma_b"] = c.aberration.lateral_chromatic[2];
  j["block_size"] = c.render.block_size;
  j["noise_sigma"] = c.render.noise_sigma;
  j["grad_threshold"] = c.grad_threshold;
  j["near_mm"] = c.near_mm;
  j["far_mm"] = c.far_mm;
  j["distance_count"] = c.distance_count;
  j["samples_per_distance"] = c.samples_per_distance;
  j["test_samples_per_distance"] = c.test_samples_per_distance;
  j["textures_per_distance"] = c.textures_per_distance;
  j["texture_dir"] = c.texture_dir;
  j["texture_color"] = c.palette == Palette::Gray ? "gray"
                       : c.palette == Palette::Saturated ? "saturated" : "mixed";
  j["color_splits"] = c.color_splits;
  j["store_side"] = c.store_side;
  j["texture_jitter"] = c.texture_jitter;
  j["label_outlier_frac"] = c.label_outlier_frac;
  j["label_outlier_min_px"] = c.label_outlier_min_px;
  j["label_outlier_max_px"] = c.label_outlier_max_px;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const SplitRecord& rec : ds.manifest.splits)
    write_bytes(dir / rec.file, encode_samples(ds.splits.at(rec.name)));

  nlohmann::ordered_json j;
  j["format"] = "cca-dataset";
  j["version"] = 1;
  j["config"] = config_json(ds.manifest.config);
  j["distances_mm"] = ds.manifest.distances_mm;
  j["blurs_px"] = ds.manifest.blurs_px;
  for (const SplitRecord& rec : ds.manifest.splits) {
    nlohmann::ordered_json s;
    s["name"] = rec.name;
    s["file"] = rec.file;
    s["count"] = rec.count;
    s["per_distance"] = rec.per_distance;
    s["shortfall"] = rec.shortfall;
    j["splits"].push_back(s);
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorKind::Io, "missing manifest.json in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
    DatasetManifest m;
    const auto& c = j.at("config");
    Config cfg;
    for (const auto& [key, value] : c.items()) {
      if (value.is_string()) cfg.set(key, value.get<std::string>());
      else if (value.is_boolean()) cfg.set(key, value.get<bool>() ? "1" : "0");
      else cfg.set(key, value.dump());
    }
    m.config = dataset_config_from(cfg);
    m.distances_mm = j.at("distances_mm").get<std::vector<double>>();
    m.blurs_px = j.at("blurs_px").get<std::vector<double>>();
    for (const auto& s : j.at("splits")) {
      SplitRecord rec;
      rec.name = s.at("name").get<std::string>();
      rec.file = s.at("file").get<std::string>();
      rec.count = s.at("count").get<std::size_t>();
      rec.per_distance = s.at("per_distance").get<std::vector<std::size_t>>();
      rec.shortfall = s.at("shortfall").get<bool>();
      m.splits.push_back(std::move(rec));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, "malformed manifest: " + std::string(e.what()));
  }
}

std::vector<PatchSample> load_split(const std::filesystem::path& dir, const std::string& split) {
  const DatasetManifest m = read_manifest(dir);
  const SplitRecord& rec = m.split(split);
  auto samples = decode_samples(read_bytes(dir / rec.file));
  if (samples.size() != rec.count) throw Error(ErrorKind::Io, "split '" + split + "' count mismatch");
  return samples;
}

}  // namespace cca
