#include "cca/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "cca/error.hpp"
#include "cca/parallel.hpp"

namespace cca {

namespace {

double clamped_distance(const LensConfig& lens, const BlurRange& range, double b) {
  const double margin = 1e-3 * std::abs(range.far_px);
  return distance_from_blur(lens, SignedBlur{std::clamp(b, range.far_px + margin, range.near_px - margin)});
}

double mean_or_nan(double sum, std::size_t n) {
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void require_same_lens(const LensConfig& a, const LensConfig& b, const std::string& what) {
  if (a.focal_length_mm != b.focal_length_mm || a.f_number != b.f_number ||
      a.focus_distance_mm != b.focus_distance_mm || a.pixel_pitch_mm != b.pixel_pitch_mm ||
      a.sensor_width != b.sensor_width || a.sensor_height != b.sensor_height || a.sigma_per_px != b.sigma_per_px)
    throw Error(ErrorKind::Mismatch, what + ": lens configurations differ");
}

MetricsReport evaluate(const std::vector<PatchSample>& samples, const std::vector<SampleEstimate>& estimates,
                       const LensConfig& lens, const EvalOptions& opts) {
  if (samples.size() != estimates.size())
    throw Error(ErrorKind::Shape, "evaluate: sample and estimate counts differ");
  const BlurRange range = invertible_blur_range(lens);
  struct Acc {
    std::size_t count = 0, evaluated = 0, hits = 0;
    double px = 0.0, mm = 0.0, gt_blur = 0.0;
  };
  std::map<double, Acc> bins;
  Acc all, center, periphery;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PatchSample& s = samples[i];
    const SampleEstimate& e = estimates[i];
    Acc& bin = bins[s.gt_distance_mm];
    bin.gt_blur = s.gt_blur.px;
    ++bin.count;
    ++all.count;
    if (!e.valid) continue;
    const double px = std::abs(e.blur.px - s.gt_blur.px);
    const double mm = px == 0.0 ? 0.0
                                : std::abs(clamped_distance(lens, range, e.blur.px) -
                                           clamped_distance(lens, range, s.gt_blur.px));
    const bool hit = px <= opts.acc_tolerance_px;
    Acc& band = radial_position(lens, s.pos) < opts.radial_split ? center : periphery;
    for (Acc* a : {&bin, &all, &band}) {
      ++a->evaluated;
      a->px += px;
      a->mm += mm;
      a->hits += hit ? 1 : 0;
    }
  }
  MetricsReport r;
  for (const auto& [d, a] : bins)
    r.bins.push_back({d, a.gt_blur, a.count, a.evaluated, mean_or_nan(a.px, a.evaluated),
                      mean_or_nan(a.mm, a.evaluated),
                      mean_or_nan(static_cast<double>(a.hits), a.evaluated)});
  r.count = all.count;
  r.evaluated = all.evaluated;
  r.mae_px = mean_or_nan(all.px, all.evaluated);
  r.mae_mm = mean_or_nan(all.mm, all.evaluated);
  r.acc = mean_or_nan(static_cast<double>(all.hits), all.evaluated);
  r.masked_fraction = r.count ? static_cast<double>(r.count - r.evaluated) / static_cast<double>(r.count) : 0.0;
  r.center = {center.evaluated, mean_or_nan(center.px, center.evaluated), mean_or_nan(center.mm, center.evaluated)};
  r.periphery = {periphery.evaluated, mean_or_nan(periphery.px, periphery.evaluated),
                 mean_or_nan(periphery.mm, periphery.evaluated)};
  return r;
}

std::vector<SampleEstimate> estimate_ddn(const DdnModel<float>& model, const std::vector<PatchSample>& samples) {
  const auto preds = predict_samples(model, samples);
  std::vector<SampleEstimate> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back({p.blur, p.sigma, true});
  return out;
}

std::vector<SampleEstimate> estimate_dfad(const std::vector<PatchSample>& samples, const LensConfig& lens,
                                          const BlurSearchSpec& spec, double grad_threshold, int workers) {
  const DfadEstimator est(lens, spec, grad_threshold);
  std::vector<SampleEstimate> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const PatchSample& s = samples[i];
    const RgbImage img = sample_to_image(s);
    const int off = (s.side - 16) / 2;
    try {
      const BlurEstimate e = est.estimate(img, off, off);
      out[i] = {e.blur, e.cost, true};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoCue) throw;
      out[i].valid = false;
    }
  });
  return out;
}

std::vector<SampleEstimate> estimate_oracle(const std::vector<PatchSample>& samples) {
  std::vector<SampleEstimate> out;
  for (const auto& s : samples) out.push_back({s.gt_blur, 0.0, true});
  return out;
}

std::vector<SampleEstimate> estimate_zero(const std::vector<PatchSample>& samples) {
  return std::vector<SampleEstimate>(samples.size(), SampleEstimate{SignedBlur{0.0}, 0.0, true});
}

std::string metrics_csv(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << "group,distance_mm,gt_blur_px,count,evaluated,mae_px,mae_mm,acc\n";
  for (const auto& b : r.bins)
    os << "bin," << b.distance_mm << ',' << b.gt_blur_px << ',' << b.count << ',' << b.evaluated << ','
       << b.mae_px << ',' << b.mae_mm << ',' << b.acc << '\n';
  os << "all,,," << r.count << ',' << r.evaluated << ',' << r.mae_px << ',' << r.mae_mm << ',' << r.acc << '\n';
  os << "center,,,," << r.center.count << ',' << r.center.mae_px << ',' << r.center.mae_mm << ",\n";
  os << "periphery,,,," << r.periphery.count << ',' << r.periphery.mae_px << ',' << r.periphery.mae_mm << ",\n";
  return os.str();
}

std::string metrics_summary(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << "samples " << r.count << " evaluated " << r.evaluated << " masked " << r.masked_fraction << "\n"
     << "mae_px " << r.mae_px << " mae_mm " << r.mae_mm << " acc " << r.acc << "\n"
     << "center mae_px " << r.center.mae_px << " (" << r.center.count << ")  periphery mae_px "
     << r.periphery.mae_px << " (" << r.periphery.count << ")\n";
  return os.str();
}

std::vector<AblationVariant> ablation_variants(const DdnConfig& base) {
  DdnConfig full = base;
  full.positional = true;
  full.color = true;
  full.input = InputMode::Gradients;
  full.loss = LossKind::BayesL1;
  std::vector<AblationVariant> v;
  v.push_back({"full", full});
  v.push_back({"no_positional", full});
  v.back().arch.positional = false;
  v.push_back({"no_color", full});
  v.back().arch.color = false;
  v.push_back({"raw_input", full});
  v.back().arch.input = InputMode::Raw;
  v.push_back({"l1_loss", full});
  v.back().arch.loss = LossKind::L1;
  return v;
}

std::vector<AblationRow> ablation_suite(const std::vector<AblationVariant>& variants, const TrainConfig& train_cfg,
                                        const Dataset& ds, const EvalOptions& opts, const VariantCallback& on_epoch) {
  const auto split = [&](const std::string& name) -> const std::vector<PatchSample>* {
    auto it = ds.splits.find(name);
    return it == ds.splits.end() ? nullptr : &it->second;
  };
  const auto* train_set = split("train");
  const auto* test_set = split("test");
  if (!train_set || !test_set) throw Error(ErrorKind::Config, "ablation needs train and test splits");
  const auto* sat = split("test_saturated");
  const auto* gray = split("test_gray");
  const LensConfig& lens = ds.manifest.config.lens;

  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow row;
    row.name = v.name;
    const TrainResult tr = train(v.arch, train_cfg, *train_set, *test_set, [&](const EpochLog& e) {
      if (on_epoch) on_epoch(v.name, e);
    });
    row.epochs_run = static_cast<int>(tr.log.size());
    row.best_epoch = tr.best_epoch;
    if (!tr.log.empty()) row.final_train_loss = tr.log.back().train_loss;
    if (tr.aborted) {
      row.ok = false;
      row.note = tr.abort_reason;
      rows.push_back(row);
      continue;
    }
    row.test = evaluate(*test_set, estimate_ddn(tr.best, *test_set), lens, opts);
    if (sat && gray) {
      row.has_color_splits = true;
      row.saturated = evaluate(*sat, estimate_ddn(tr.best, *sat), lens, opts);
      row.gray = evaluate(*gray, estimate_ddn(tr.best, *gray), lens, opts);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "variant,status,epochs,best_epoch,final_train_loss,test_mae_px,test_mae_mm,test_acc,center_mae_px,"
        "periphery_mae_px,saturated_mae_px,gray_mae_px,note\n";
  for (const auto& r : rows) {
    os << r.name << ',' << (r.ok ? "ok" : "failed") << ',' << r.epochs_run << ',' << r.best_epoch << ','
       << r.final_train_loss << ',';
    if (r.ok) {
      os << r.test.mae_px << ',' << r.test.mae_mm << ',' << r.test.acc << ',' << r.test.center.mae_px << ','
         << r.test.periphery.mae_px << ',';
      if (r.has_color_splits)
        os << r.saturated.mae_px << ',' << r.gray.mae_px;
      else
        os << ',';
    } else {
      os << ",,,,,,";
    }
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    os << ',' << note << '\n';
  }
  return os.str();
}

LossStability loss_stability(const std::vector<double>& losses, bool completed, std::size_t skip) {
  LossStability s;
  s.completed = completed;
  std::vector<double> v(losses.begin() + static_cast<std::ptrdiff_t>(std::min(skip, losses.size())), losses.end());
  s.epochs = v.size();
  if (v.empty()) return s;
  for (double x : v)
    if (!(x > 0.0)) throw Error(ErrorKind::Domain, "loss stability needs positive losses");
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.max = sorted.back();
  s.spike_ratio = s.max / s.median;
  for (double x : v)
    if (x > 10.0 * s.median) ++s.spikes;
  return s;
}

}  // namespace cca

namespace cca {

namespace {

std::uint16_t encode_unit(double t) {
  return static_cast<std::uint16_t>(1 + std::lround(std::clamp(t, 0.0, 1.0) * 65534.0));
}

}  // namespace

Grid<std::uint16_t> encode_depth(const Grid<float>& distance_mm, double near_mm, double far_mm) {
  if (!(far_mm > near_mm)) throw Error(ErrorKind::Config, "depth encoding needs far > near");
  Grid<std::uint16_t> out(distance_mm.width(), distance_mm.height(), 0);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const float d = distance_mm.at(x, y);
      if (std::isfinite(d)) out.at(x, y) = encode_unit((d - near_mm) / (far_mm - near_mm));
    }
  return out;
}

Grid<std::uint16_t> encode_reliability(const Grid<float>& sigma) {
  Grid<std::uint16_t> out(sigma.width(), sigma.height(), 0);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const float s = sigma.at(x, y);
      if (std::isfinite(s) && s > 0.0f) out.at(x, y) = encode_unit((std::log(s) + 6.0) / 12.0);
    }
  return out;
}

}  // namespace cca
