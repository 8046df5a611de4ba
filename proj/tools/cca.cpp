#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cca/config.hpp"
#include "cca/dataset.hpp"
#include "cca/ddn.hpp"
#include "cca/dfad.hpp"
#include "cca/error.hpp"
#include "cca/eval.hpp"
#include "cca/gradcheck_suite.hpp"
#include "cca/image.hpp"
#include "cca/optics.hpp"
#include "cca/render.hpp"
#include "cca/texture.hpp"
#include "cca/train.hpp"

namespace fs = std::filesystem;
using namespace cca;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<int> workers;
};

void add_common(CLI::App* app, CommonOptions& o, bool out_required = true) {
  app->add_option("--config", o.config, "key=value config file");
  app->add_option("--seed", o.seed, "random seed");
  auto* out = app->add_option("--out", o.out, "output directory");
  if (out_required) out->required();
  app->add_option("--set", o.overrides, "override, key=value (repeatable)");
  app->add_option("--workers", o.workers, "worker threads");
}

Config resolve(const CommonOptions& o) {
  Config cfg;
  if (!o.config.empty()) cfg.merge_file(o.config);
  for (const auto& s : o.overrides) cfg.apply_override(s);
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.workers) cfg.set("workers", std::to_string(*o.workers));
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    cfg.write_snapshot(fs::path(o.out) / "config.resolved.cfg");
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

/// depth.pgm plus depth_range.txt declaring the encoded millimetre range.
void write_depth_pgm(const fs::path& out, const Grid<float>& distance_mm, const Config& cfg) {
  const double near_mm = cfg.get_double("near_mm");
  const double far_mm = cfg.get_double("far_mm");
  write_pgm16(out / "depth.pgm", encode_depth(distance_mm, near_mm, far_mm));
  char text[160];
  std::snprintf(text, sizeof text, "near_mm=%.9g\nfar_mm=%.9g\nlevel_1=near_mm\nlevel_65535=far_mm\nlevel_0=masked\n",
                near_mm, far_mm);
  write_text(out / "depth_range.txt", text);
}

/// Dataset from `dataset_dir`, or rendered in memory from the config when unset.
Dataset obtain_dataset(const Config& cfg) {
  const std::string& dir = cfg.get("dataset_dir");
  if (dir.empty()) {
    std::cerr << "rendering dataset in memory\n";
    return build_dataset(dataset_config_from(cfg));
  }
  Dataset ds;
  ds.manifest = read_manifest(dir);
  for (const auto& s : ds.manifest.splits) ds.splits[s.name] = load_split(dir, s.name);
  return ds;
}

const std::vector<PatchSample>& require_split(const Dataset& ds, const std::string& name) {
  auto it = ds.splits.find(name);
  if (it == ds.splits.end()) throw Error(ErrorKind::Config, "dataset has no split '" + name + "'");
  return it->second;
}

void print_epoch(const std::string& tag, const EpochLog& e) {
  std::fprintf(stderr, "%s epoch %d loss %.5f test_mae_px %.4f test_acc %.3f\n", tag.c_str(), e.epoch,
               e.train_loss, e.test_mae_px, e.test_acc);
}

void write_split_stats(const Dataset& ds) {
  for (const auto& s : ds.manifest.splits)
    std::cout << s.name << ": " << s.count << " patches" << (s.shortfall ? " (shortfall)" : "") << "\n";
}

int run_render(const Config& cfg, const fs::path& out, bool scene) {
  if (!scene) {
    const Dataset ds = build_dataset(dataset_config_from(cfg));
    write_dataset(ds, out);
    write_split_stats(ds);
    return 0;
  }
  const LensConfig lens = lens_from_config(cfg);
  const AberrationField ab = aberration_from_config(cfg);
  const std::uint64_t seed = cfg.get_u64("seed");
  Rng tex_rng(derive_seed(seed, 500, 0));
  const RgbImage texture =
      procedural_texture(lens.sensor_width, lens.sensor_height, parse_palette(cfg.get("texture_color")), tex_rng);
  const auto planes = blur_spaced_distances(lens, cfg.get_double("near_mm"), cfg.get_double("far_mm"), 5);
  const double left = planes[1];
  const double right = planes[3];
  auto depth = [&](SensorPos p) { return p.x < 0.0 ? left : right; };
  RenderOptions opts;
  opts.block_size = cfg.get_int("block_size");
  opts.noise_sigma = cfg.get_double("noise_sigma");
  opts.noise_seed = derive_seed(seed, 501, 0);
  const RgbImage img = render_depth_field(texture, depth, lens, ab, opts);
  write_ppm(out / "scene.ppm", img);
  Grid<float> gt(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      gt.at(x, y) = static_cast<float>(depth(sensor_position(x + 0.5, y + 0.5, img.width(), img.height())));
  write_float_raster(out / "scene_depth.ccaz", gt);
  std::cout << "scene planes " << left << " mm (left) and " << right << " mm (right)\n";
  return 0;
}

int run_train(const Config& cfg, const fs::path& out) {
  const Dataset ds = obtain_dataset(cfg);
  const LensConfig& lens = ds.manifest.config.lens;
  const TrainResult r = train(ddn_config_from(cfg), train_config_from(cfg, lens), require_split(ds, "train"),
                              require_split(ds, "test"), [](const EpochLog& e) { print_epoch("train", e); });
  write_text(out / "train_log.csv", training_log_csv(r.log));
  if (r.aborted) throw Error(ErrorKind::Numeric, "training aborted: " + r.abort_reason);
  save_model(out / "model.ccaw", r.best, lens);
  std::cout << "best epoch " << r.best_epoch << " test_mae_px " << r.log[r.best_epoch - 1].test_mae_px << "\n";
  return 0;
}

const std::string& require_key(const Config& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw Error(ErrorKind::Config, key + " must be set");
  return v;
}

int run_dfad(const Config& cfg, const fs::path& out) {
  const LensConfig lens = lens_from_config(cfg);
  const RgbImage img = read_ppm(require_key(cfg, "image_path"));
  const DepthMap map = dfad_depth_map(img, lens, search_spec_from(cfg), cfg.get_int("stride"),
                                      cfg.get_double("grad_threshold"), cfg.get_int("workers"));
  write_depth_pgm(out, map.distance_mm, cfg);
  write_float_raster(out / "depth.ccaz", map.distance_mm);
  write_float_raster(out / "blur.ccaz", map.blur_px);
  std::cout << "depth map " << map.distance_mm.width() << "x" << map.distance_mm.height() << "\n";
  return 0;
}

int run_infer(const Config& cfg, const fs::path& out) {
  const LoadedModel m = load_model(require_key(cfg, "model_path"));
  require_same_lens(m.lens, lens_from_config(cfg), "model vs config");
  const RgbImage img = read_ppm(require_key(cfg, "image_path"));
  const DdnDepthMap map = ddn_depth_map(m.model, img, m.lens, cfg.get_int("stride"),
                                        cfg.get_double("sigma_threshold"), cfg.get_double("grad_threshold"));
  write_depth_pgm(out, map.distance_mm, cfg);
  write_pgm16(out / "reliability.pgm", encode_reliability(map.sigma));
  write_float_raster(out / "depth.ccaz", map.distance_mm);
  write_float_raster(out / "sigma.ccaz", map.sigma);
  write_float_raster(out / "blur.ccaz", map.blur_px);
  std::cout << "depth map " << map.distance_mm.width() << "x" << map.distance_mm.height() << "\n";
  return 0;
}

EvalOptions eval_options(const Config& cfg, const LensConfig& lens) {
  EvalOptions o;
  o.radial_split = cfg.get_double("radial_split");
  o.acc_tolerance_px = accuracy_tolerance_px(lens, cfg.get_double("acc_tolerance_mm"));
  return o;
}

int run_eval(const Config& cfg, const fs::path& out) {
  const fs::path dir = require_key(cfg, "dataset_dir");
  const DatasetManifest manifest = read_manifest(dir);
  const LensConfig& lens = manifest.config.lens;
  const std::string split = cfg.get("eval_split");
  manifest.split(split);
  const auto samples = load_split(dir, split);
  const std::string& kind = cfg.get("estimator");
  std::vector<SampleEstimate> est;
  if (kind == "ddn") {
    const LoadedModel m = load_model(require_key(cfg, "model_path"));
    require_same_lens(m.lens, lens, "model vs dataset");
    est = estimate_ddn(m.model, samples);
  } else if (kind == "dfad") {
    est = estimate_dfad(samples, lens, search_spec_from(cfg), cfg.get_double("grad_threshold"),
                        cfg.get_int("workers"));
  } else if (kind == "oracle") {
    est = estimate_oracle(samples);
  } else if (kind == "zero") {
    est = estimate_zero(samples);
  } else {
    throw Error(ErrorKind::Config, "estimator must be ddn, dfad, oracle or zero, got '" + kind + "'");
  }
  const MetricsReport r = evaluate(samples, est, lens, eval_options(cfg, lens));
  write_text(out / "metrics.csv", metrics_csv(r));
  std::cout << metrics_summary(r);
  return 0;
}

int run_ablate(const Config& cfg, const fs::path& out) {
  const Dataset ds = obtain_dataset(cfg);
  const LensConfig& lens = ds.manifest.config.lens;
  std::map<std::string, std::vector<EpochLog>> logs;
  const auto rows = ablation_suite(ablation_variants(ddn_config_from(cfg)), train_config_from(cfg, lens), ds,
                                   eval_options(cfg, lens), [&](const std::string& v, const EpochLog& e) {
                                     print_epoch(v, e);
                                     logs[v].push_back(e);
                                   });
  for (const auto& [name, log] : logs) write_text(out / ("train_log_" + name + ".csv"), training_log_csv(log));
  const std::string csv = ablation_csv(rows);
  write_text(out / "ablation.csv", csv);
  std::cout << csv;
  return 0;
}

int run_gradcheck(const Config& cfg, const std::string& out) {
  const auto rows = run_gradcheck_suite(cfg.get_u64("seed"));
  std::string csv = "op,max_rel_error,checked,tolerance,status\n";
  bool ok = true;
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.3e,%zu,%.0e,%s\n", r.name.c_str(), r.max_rel_error, r.checked,
                  r.tolerance, r.passed() ? "ok" : "FAIL");
    csv += line;
    std::printf("%-18s %10.3e %6zu  %s\n", r.name.c_str(), r.max_rel_error, r.checked, r.passed() ? "ok" : "FAIL");
    ok = ok && r.passed();
  }
  if (!out.empty()) write_text(fs::path(out) / "gradcheck.csv", csv);
  if (!ok) throw Error(ErrorKind::Numeric, "gradient check failed");
  return 0;
}

int run_losscmp(const Config& cfg, const fs::path& out) {
  const Dataset ds = obtain_dataset(cfg);
  const LensConfig& lens = ds.manifest.config.lens;
  const TrainConfig tc = train_config_from(cfg, lens);
  DdnConfig arch = ddn_config_from(cfg);
  const auto skip = static_cast<std::size_t>(cfg.get_int("stability_skip_epochs"));
  std::string csv = "loss,completed,epochs,median,max,spike_ratio,spikes,note\n";
  for (LossKind kind : {LossKind::BayesL1, LossKind::BayesL2}) {
    arch.loss = kind;
    const std::string name = to_string(kind);
    const TrainResult r = train(arch, tc, require_split(ds, "train"), require_split(ds, "test"),
                                [&](const EpochLog& e) { print_epoch(name, e); });
    write_text(out / ("train_log_" + name + ".csv"), training_log_csv(r.log));
    std::vector<double> fit;
    for (const auto& e : r.log) fit.push_back(e.train_fit);
    const LossStability s = loss_stability(fit, !r.aborted, skip);
    char line[256];
    std::snprintf(line, sizeof line, "%s,%d,%zu,%.9g,%.9g,%.9g,%d,%s\n", name.c_str(), s.completed ? 1 : 0,
                  s.epochs, s.median, s.max, s.spike_ratio, s.spikes, r.abort_reason.c_str());
    csv += line;
  }
  write_text(out / "losscmp.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Color-coded-aperture depth simulator and estimators"};
  app.require_subcommand(1);
  CommonOptions opts;
  bool scene = false;

  auto* render = app.add_subcommand("render", "render a patch dataset (or a two-plane scene with --scene)");
  add_common(render, opts);
  render->add_flag("--scene", scene, "render a two-plane test scene instead of a dataset");
  auto* train_cmd = app.add_subcommand("train", "train the deaberration network");
  add_common(train_cmd, opts);
  auto* dfad = app.add_subcommand("dfad", "analytical depth map of image_path");
  add_common(dfad, opts);
  auto* infer = app.add_subcommand("infer", "network depth and reliability map of image_path");
  add_common(infer, opts);
  auto* eval = app.add_subcommand("eval", "metrics of an estimator on a dataset split");
  add_common(eval, opts);
  auto* ablate = app.add_subcommand("ablate", "train and compare the ablation variants");
  add_common(ablate, opts);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference verification of autograd");
  add_common(gradcheck, opts, false);
  auto* losscmp = app.add_subcommand("losscmp", "training stability of Bayes L1 vs Bayes L2");
  add_common(losscmp, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const Config cfg = resolve(opts);
    const fs::path out = opts.out;
    if (render->parsed()) return run_render(cfg, out, scene);
    if (train_cmd->parsed()) return run_train(cfg, out);
    if (dfad->parsed()) return run_dfad(cfg, out);
    if (infer->parsed()) return run_infer(cfg, out);
    if (eval->parsed()) return run_eval(cfg, out);
    if (ablate->parsed()) return run_ablate(cfg, out);
    if (gradcheck->parsed()) return run_gradcheck(cfg, opts.out);
    if (losscmp->parsed()) return run_losscmp(cfg, out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
