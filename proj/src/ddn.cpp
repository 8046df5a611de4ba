#include "cca/ddn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cca/config.hpp"
#include "cca/error.hpp"
#include "cca/image.hpp"

namespace cca {

void DdnConfig::validate() const {
  if (patch_side != 16) throw Error(ErrorKind::Config, "ddn patch side must be 16");
  if (channels < 1) throw Error(ErrorKind::Config, "channels must be >= 1");
  if (resblocks < 0) throw Error(ErrorKind::Config, "resblocks must be >= 0");
  if (!(input_gain > 0.0) || !(blur_scale > 0.0))
    throw Error(ErrorKind::Config, "input_gain and blur_scale must be > 0");
  if (!(log_sigma_min < log_sigma_max)) throw Error(ErrorKind::Config, "log_sigma_min must be < log_sigma_max");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::L1: return "l1";
    case LossKind::BayesL1: return "bayes_l1";
    case LossKind::BayesL2: return "bayes_l2";
  }
  return "?";
}

std::string to_string(InputMode m) { return m == InputMode::Gradients ? "gradients" : "raw"; }
std::string to_string(SigmaParam p) { return p == SigmaParam::Log ? "log" : "raw"; }

DdnConfig ddn_config_from(const Config& cfg) {
  DdnConfig d;
  d.channels = cfg.get_int("channels");
  d.resblocks = cfg.get_int("resblocks");
  d.positional = cfg.get_bool("positional_branch");
  d.color = cfg.get_bool("color_branch");
  const std::string& input = cfg.get("input_mode");
  if (input == "gradients")
    d.input = InputMode::Gradients;
  else if (input == "raw")
    d.input = InputMode::Raw;
  else
    throw Error(ErrorKind::Config, "input_mode must be gradients or raw, got '" + input + "'");
  const std::string& loss = cfg.get("loss");
  if (loss == "l1")
    d.loss = LossKind::L1;
  else if (loss == "bayes_l1")
    d.loss = LossKind::BayesL1;
  else if (loss == "bayes_l2")
    d.loss = LossKind::BayesL2;
  else
    throw Error(ErrorKind::Config, "loss must be l1, bayes_l1 or bayes_l2, got '" + loss + "'");
  const std::string& sp = cfg.get("sigma_param");
  if (sp == "log")
    d.sigma_param = SigmaParam::Log;
  else if (sp == "raw")
    d.sigma_param = SigmaParam::Raw;
  else
    throw Error(ErrorKind::Config, "sigma_param must be log or raw, got '" + sp + "'");
  d.log_sigma_min = cfg.get_double("log_sigma_min");
  d.log_sigma_max = cfg.get_double("log_sigma_max");
  d.input_gain = cfg.get_double("input_gain");
  d.blur_scale = cfg.get_double("blur_scale");
  d.validate();
  return d;
}

void hue_saturation(double r, double g, double b, double& hue, double& sat) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  sat = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    hue = 0.0;
    return;
  }
  double h;
  if (mx == r)
    h = (g - b) / d;
  else if (mx == g)
    h = 2.0 + (b - r) / d;
  else
    h = 4.0 + (r - g) / d;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
  if (h >= 1.0) h -= 1.0;
  hue = h;
}

Preprocessed preprocess(std::span<const float> patch, int side, SensorPos pos) {
  if (side != 16 || patch.size() != 3u * 16 * 16) throw Error(ErrorKind::Shape, "preprocess expects a 3x16x16 patch");
  Preprocessed p;
  p.grad_stack.resize(6 * 256);
  p.pos_maps.resize(2 * 256);
  p.color_maps.resize(2 * 256);
  fill_inputs<double>(patch, pos, InputMode::Gradients, p.grad_stack.data(), p.pos_maps.data(), p.color_maps.data());
  return p;
}

AugmentDraw identity_augment(int stored_side) {
  AugmentDraw d;
  d.crop_x = d.crop_y = (stored_side - 16) / 2;
  return d;
}

AugmentDraw draw_augment(Rng& rng, int stored_side, const AugmentOptions& opts) {
  if (stored_side < 16) throw Error(ErrorKind::Size, "stored patch side must be >= 16");
  AugmentDraw d;
  d.crop_x = rng.integer(0, stored_side - 16);
  d.crop_y = rng.integer(0, stored_side - 16);
  d.brightness = rng.uniform(opts.brightness_min, opts.brightness_max);
  d.erase = rng.bernoulli(opts.erase_prob);
  if (d.erase) {
    d.erase_w = rng.integer(opts.erase_min, opts.erase_max);
    d.erase_h = rng.integer(opts.erase_min, opts.erase_max);
    d.erase_x = rng.integer(0, 16 - d.erase_w);
    d.erase_y = rng.integer(0, 16 - d.erase_h);
    d.erase_value = static_cast<float>(rng.uniform());
  }
  return d;
}

std::vector<float> apply_augment(const PatchSample& s, const AugmentDraw& d) {
  if (d.crop_x < 0 || d.crop_y < 0 || d.crop_x + 16 > s.side || d.crop_y + 16 > s.side)
    throw Error(ErrorKind::Range, "augment crop outside the stored patch");
  std::vector<float> out(3 * 256);
  const bool scale = d.brightness != 1.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        float v = s.value(c, x + d.crop_x, y + d.crop_y);
        if (scale) v = static_cast<float>(std::clamp(v * d.brightness, 0.0, 1.0));
        if (d.erase && x >= d.erase_x && x < d.erase_x + d.erase_w && y >= d.erase_y && y < d.erase_y + d.erase_h)
          v = d.erase_value;
        out[(c * 16 + y) * 16 + x] = v;
      }
  return out;
}

std::vector<float> augment(const PatchSample& s, Rng& rng, const AugmentOptions& opts) {
  return apply_augment(s, draw_augment(rng, s.side, opts));
}

std::vector<float> center_crop(const PatchSample& s) { return apply_augment(s, identity_augment(s.side)); }

std::vector<Prediction> predict(const DdnModel<float>& model, const std::vector<std::vector<float>>& patches,
                                const std::vector<SensorPos>& positions, int batch) {
  if (patches.size() != positions.size()) throw Error(ErrorKind::Shape, "predict: patches and positions differ");
  std::vector<Prediction> out;
  out.reserve(patches.size());
  const auto step = static_cast<std::size_t>(std::max(batch, 1));
  for (std::size_t start = 0; start < patches.size(); start += step) {
    const std::size_t end = std::min(patches.size(), start + step);
    std::vector<std::vector<float>> p(patches.begin() + start, patches.begin() + end);
    std::vector<SensorPos> q(positions.begin() + start, positions.begin() + end);
    auto b = make_batch<float>(p, q, {}, model.config().input);
    ag::Tape<float> tape(false);
    auto o = model.forward(tape, b);
    for (std::size_t i = 0; i < p.size(); ++i)
      out.push_back({SignedBlur{o.blur.value()[i]}, std::exp(static_cast<double>(o.log_sigma.value()[i]))});
  }
  return out;
}

std::vector<Prediction> predict_samples(const DdnModel<float>& model, const std::vector<PatchSample>& samples,
                                        int batch) {
  std::vector<std::vector<float>> patches;
  std::vector<SensorPos> pos;
  patches.reserve(samples.size());
  for (const auto& s : samples) {
    patches.push_back(center_crop(s));
    pos.push_back(s.pos);
  }
  return predict(model, patches, pos, batch);
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p, const char* ext) {
  auto s = p;
  s += ext;
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void save_model(const std::filesystem::path& path, const DdnModel<float>& model, const LensConfig& lens) {
  const auto tensors = model.export_tensors();
  ag::write_checkpoint(path, tensors);
  const DdnConfig& c = model.config();
  std::ostringstream cfg;
  cfg << "channels=" << c.channels << "\n"
      << "resblocks=" << c.resblocks << "\n"
      << "positional_branch=" << (c.positional ? 1 : 0) << "\n"
      << "color_branch=" << (c.color ? 1 : 0) << "\n"
      << "input_mode=" << to_string(c.input) << "\n"
      << "loss=" << to_string(c.loss) << "\n"
      << "sigma_param=" << to_string(c.sigma_param) << "\n"
      << "log_sigma_min=" << fmt(c.log_sigma_min) << "\n"
      << "log_sigma_max=" << fmt(c.log_sigma_max) << "\n"
      << "input_gain=" << fmt(c.input_gain) << "\n"
      << "blur_scale=" << fmt(c.blur_scale) << "\n"
      << "focal_length_mm=" << fmt(lens.focal_length_mm) << "\n"
      << "f_number=" << fmt(lens.f_number) << "\n"
      << "focus_distance_mm=" << fmt(lens.focus_distance_mm) << "\n"
      << "pixel_pitch_mm=" << fmt(lens.pixel_pitch_mm) << "\n"
      << "sensor_width=" << lens.sensor_width << "\n"
      << "sensor_height=" << lens.sensor_height << "\n"
      << "sigma_per_px=" << fmt(lens.sigma_per_px) << "\n";
  const std::string text = cfg.str();
  write_bytes(sidecar(path, ".cfg"), std::as_bytes(std::span(text.data(), text.size())));
  const std::string summary = ag::checkpoint_summary(tensors);
  write_bytes(sidecar(path, ".txt"), std::as_bytes(std::span(summary.data(), summary.size())));
}

LoadedModel load_model(const std::filesystem::path& path) {
  Config cfg;
  cfg.merge_file(sidecar(path, ".cfg"));
  LoadedModel m;
  m.lens = lens_from_config(cfg);
  m.model = DdnModel<float>(ddn_config_from(cfg), 0);
  m.model.import_tensors(ag::read_checkpoint(path));
  return m;
}

}  // namespace cca
