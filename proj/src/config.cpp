#include "cca/config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "cca/error.hpp"

namespace cca {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      // lens
      {"focal_length_mm", "50", "lens focal length"},
      {"f_number", "4", "aperture f-number"},
      {"focus_distance_mm", "1500", "in-focus object distance"},
      {"pixel_pitch_mm", "0.01", "sensor pixel pitch"},
      {"sensor_width", "256", "sensor width in pixels"},
      {"sensor_height", "256", "sensor height in pixels"},
      {"sigma_per_px", "0.5", "Gaussian sigma per pixel of blur radius"},
      {"fc_coeff", "0", "field curvature coefficient (px at r=1)"},
      {"coma_coeff", "0", "coma skew coefficient"},
      {"chroma_r", "1", "lateral chromatic radial scale, R"},
      {"chroma_g", "1", "lateral chromatic radial scale, G"},
      {"chroma_b", "1", "lateral chromatic radial scale, B"},
      // render / dataset
      {"block_size", "32", "shift-variant convolution block side"},
      {"noise_sigma", "0.002", "additive Gaussian sensor noise"},
      {"grad_threshold", "0.02", "minimum mean gradient magnitude of a usable patch"},
      {"near_mm", "1100", "nearest training distance"},
      {"far_mm", "2400", "farthest training distance"},
      {"distance_count", "20", "distances, equally spaced in signed blur"},
      {"samples_per_distance", "250", "training patches per distance"},
      {"test_samples_per_distance", "50", "test patches per distance (per test split)"},
      {"textures_per_distance", "4", "source textures rendered per distance and split"},
      {"texture_dir", "", "directory of PPM textures; empty selects procedural textures"},
      {"texture_color", "mixed", "procedural palette: mixed, gray or saturated"},
      {"color_splits", "1", "also write saturated-color and grayscale test splits"},
      {"store_side", "20", "stored patch side (>= 16; margin feeds random crop)"},
      {"texture_jitter", "1", "random flips and scaling of source textures"},
      {"label_outlier_frac", "0", "fraction of training labels perturbed (stress data)"},
      {"label_outlier_min_px", "4", "minimum outlier perturbation"},
      {"label_outlier_max_px", "8", "maximum outlier perturbation"},
      // dfad
      {"search_min_px", "-12", "lower end of the blur search grid"},
      {"search_max_px", "12", "upper end of the blur search grid"},
      {"grid_count", "65", "blur hypotheses on the search grid"},
      {"refine", "1", "parabolic refinement around the grid minimum"},
      {"stride", "8", "depth map window stride"},
      // ddn
      {"channels", "32", "feature channels in every layer"},
      {"resblocks", "5", "ResBlocks per branch"},
      {"positional_branch", "1", "enable positional attention"},
      {"color_branch", "1", "enable color attention"},
      {"input_mode", "gradients", "main input: gradients or raw"},
      {"loss", "bayes_l1", "l1, bayes_l1 or bayes_l2"},
      {"sigma_param", "log", "reliability head: log (clamped log|sigma|) or raw"},
      {"log_sigma_min", "-6", "lower clamp on log|sigma|"},
      {"log_sigma_max", "6", "upper clamp on log|sigma|"},
      {"input_gain", "10", "fixed factor on the gradient input planes"},
      {"blur_scale", "8", "fixed factor on the blur head output (px)"},
      {"batch", "128", "mini-batch size"},
      {"epochs", "40", "training epochs"},
      {"lr", "0.001", "ADAM learning rate"},
      {"beta1", "0.9", "ADAM beta1"},
      {"beta2", "0.999", "ADAM beta2"},
      {"adam_eps", "1e-8", "ADAM epsilon"},
      {"augment", "1", "random crop, brightness and erasing"},
      {"brightness_min", "0.8", "lower brightness factor"},
      {"brightness_max", "1.25", "upper brightness factor"},
      {"erase_prob", "0.3", "random erasing probability"},
      {"check_finite", "1", "assert finite values on every tape node"},
      {"record_wall_time", "0", "write wall-clock seconds into the training log"},
      {"sigma_threshold", "1.0", "reliability rejection threshold for depth maps"},
      {"stability_skip_epochs", "0", "leading epochs excluded from loss spike statistics"},
      // eval
      {"radial_split", "0.5", "center/periphery boundary in normalized radius"},
      {"acc_tolerance_mm", "8.1", "accuracy tolerance at the focus distance"},
      // run
      {"seed", "1", "master seed"},
      {"workers", "1", "worker threads for parallel-safe stages"},
      {"dataset_dir", "", "dataset directory (train/eval input)"},
      {"model_path", "", "checkpoint path (infer/eval input)"},
      {"image_path", "", "PPM image for dfad/infer"},
      {"estimator", "ddn", "eval estimator: ddn, dfad, oracle or zero"},
      {"eval_split", "test", "dataset split evaluated by eval"},
  };
  return keys;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_known(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.name == key) return true;
  return false;
}

}  // namespace

Config::Config() {
  for (const auto& k : config_keys()) values_[std::string(k.name)] = std::string(k.default_value);
}

Config Config::from_file(const std::filesystem::path& path) {
  Config c;
  c.merge_file(path);
  return c;
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str());
}

void Config::merge_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    apply_override(t);
  }
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw Error(ErrorKind::Config, "expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) throw Error(ErrorKind::UnknownKey, "unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::UnknownKey, "unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::Config, key + ": not a number '" + v + "'");
  }
}

int Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw Error(ErrorKind::Config, key + ": not an integer '" + v + "'");
  return out;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw Error(ErrorKind::Config, key + ": not an unsigned integer '" + v + "'");
  return out;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::Config, key + ": not a boolean '" + v + "'");
}

std::string Config::snapshot() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

void Config::write_snapshot(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << snapshot();
}

}  // namespace cca
