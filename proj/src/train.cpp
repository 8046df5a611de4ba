#include "cca/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cca/config.hpp"
#include "cca/error.hpp"
#include "cca/optics.hpp"

namespace cca {

double accuracy_tolerance_px(const LensConfig& lens, double tolerance_mm) {
  return std::abs(ideal_blur(lens, lens.focus_distance_mm - tolerance_mm).px);
}

TrainConfig train_config_from(const Config& cfg, const LensConfig& lens) {
  TrainConfig t;
  t.batch = cfg.get_int("batch");
  t.epochs = cfg.get_int("epochs");
  t.adam.lr = cfg.get_double("lr");
  t.adam.beta1 = cfg.get_double("beta1");
  t.adam.beta2 = cfg.get_double("beta2");
  t.adam.eps = cfg.get_double("adam_eps");
  t.augment = cfg.get_bool("augment");
  t.aug.brightness_min = cfg.get_double("brightness_min");
  t.aug.brightness_max = cfg.get_double("brightness_max");
  t.aug.erase_prob = cfg.get_double("erase_prob");
  t.check_finite = cfg.get_bool("check_finite");
  t.record_wall_time = cfg.get_bool("record_wall_time");
  t.seed = cfg.get_u64("seed");
  t.acc_tolerance_px = accuracy_tolerance_px(lens, cfg.get_double("acc_tolerance_mm"));
  if (t.batch < 1) throw Error(ErrorKind::Config, "batch must be >= 1");
  if (t.epochs < 1) throw Error(ErrorKind::Config, "epochs must be >= 1");
  if (!(t.aug.brightness_min > 0.0 && t.aug.brightness_min <= t.aug.brightness_max))
    throw Error(ErrorKind::Config, "brightness range must satisfy 0 < min <= max");
  return t;
}

namespace {

void test_metrics(const DdnModel<float>& model, const std::vector<PatchSample>& test, double tol, EpochLog& log) {
  if (test.empty()) {
    log.test_mae_px = std::numeric_limits<double>::quiet_NaN();
    log.test_acc = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const auto preds = predict_samples(model, test);
  double err = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double e = std::abs(preds[i].blur.px - test[i].gt_blur.px);
    err += e;
    if (e <= tol) ++hits;
  }
  log.test_mae_px = err / static_cast<double>(test.size());
  log.test_acc = static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace

TrainResult train(const DdnConfig& arch, const TrainConfig& cfg, const std::vector<PatchSample>& train_set,
                  const std::vector<PatchSample>& test_set, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw Error(ErrorKind::Size, "training set is empty");
  DdnModel<float> model(arch, derive_seed(cfg.seed, 1, 0));
  auto params = model.parameters();
  ag::AdamState<float> adam;
  TrainResult result;
  double best_mae = std::numeric_limits<double>::infinity();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order.begin(), order.end());
    Rng aug_rng(derive_seed(cfg.seed, 3, static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    double fit_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<std::vector<float>> patches;
      std::vector<SensorPos> pos;
      std::vector<double> targets;
      for (std::size_t i = start; i < end; ++i) {
        const PatchSample& s = train_set[order[i]];
        patches.push_back(cfg.augment ? augment(s, aug_rng, cfg.aug) : center_crop(s));
        pos.push_back(s.pos);
        targets.push_back(s.gt_blur.px);
      }
      auto batch = make_batch<float>(patches, pos, targets, arch.input);
      ag::Tape<float> tape;
      try {
        auto out = model.forward(tape, batch);
        auto loss = compute_loss(tape, arch.loss, out, batch.target);
        const double lv = loss.item();
        if (!std::isfinite(lv)) throw Error(ErrorKind::Numeric, "non-finite loss");
        for (auto& p : params) p.zero_grad();
        tape.backward(loss);
        if (cfg.check_finite) tape.check_finite();
        for (auto& p : params)
          for (float g : p.grad())
            if (!std::isfinite(g)) throw Error(ErrorKind::Numeric, "non-finite parameter gradient");
        loss_sum += lv * static_cast<double>(end - start);
        for (std::size_t i = 0; i < end - start; ++i) {
          const double e = std::abs(static_cast<double>(out.blur.value()[i]) - targets[i]);
          const double s = out.log_sigma.value()[i];
          switch (arch.loss) {
            case LossKind::L1: fit_sum += e; break;
            case LossKind::BayesL1: fit_sum += std::exp(-s) * e; break;
            case LossKind::BayesL2: fit_sum += std::exp(-2.0 * s) * e * e; break;
          }
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric && e.kind() != ErrorKind::Domain) throw;
        result.aborted = true;
        result.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
        break;
      }
      ag::adam_step<float>(params, adam, cfg.adam);
    }
    if (result.aborted) break;

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(order.size());
    log.train_fit = fit_sum / static_cast<double>(order.size());
    test_metrics(model, test_set, cfg.acc_tolerance_px, log);
    if (cfg.record_wall_time)
      log.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    const bool better = test_set.empty() || log.test_mae_px < best_mae;
    if (better) {
      if (!test_set.empty()) best_mae = log.test_mae_px;
      result.best = model.clone();
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch == 0) {
    result.best = model.clone();
  }
  return result;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,train_loss,test_mae_px,test_acc,wall_s\n";
  for (const auto& e : log)
    os << e.epoch << ',' << e.train_loss << ',' << e.test_mae_px << ',' << e.test_acc << ',' << e.wall_s << '\n';
  return os.str();
}

DdnDepthMap ddn_depth_map(const DdnModel<float>& model, const RgbImage& img, const LensConfig& lens, int stride,
                          double sigma_threshold, double grad_threshold) {
  constexpr int kWindow = 16;
  if (stride < 1) throw Error(ErrorKind::Config, "stride must be >= 1");
  if (img.width() < kWindow || img.height() < kWindow)
    throw Error(ErrorKind::Size, "image smaller than one 16x16 window");
  const int nx = (img.width() - kWindow) / stride + 1;
  const int ny = (img.height() - kWindow) / stride + 1;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  DdnDepthMap map;
  map.stride = stride;
  map.window = kWindow;
  map.distance_mm = Grid<float>(nx, ny, nan);
  map.blur_px = Grid<float>(nx, ny, nan);
  map.sigma = Grid<float>(nx, ny, nan);
  map.no_cue = Grid<std::uint8_t>(nx, ny, 0);
  map.unreliable = Grid<std::uint8_t>(nx, ny, 0);

  std::vector<std::pair<int, int>> cells;
  std::vector<std::vector<float>> patches;
  std::vector<SensorPos> positions;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const int x0 = ix * stride;
      const int y0 = iy * stride;
      if (mean_gradient_magnitude(img, x0, y0, kWindow) < grad_threshold) {
        map.no_cue.at(ix, iy) = 1;
        continue;
      }
      std::vector<float> p(3 * kWindow * kWindow);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < kWindow; ++y)
          for (int x = 0; x < kWindow; ++x)
            p[(c * kWindow + y) * kWindow + x] = static_cast<float>(img.at(c, x0 + x, y0 + y));
      cells.emplace_back(ix, iy);
      patches.push_back(std::move(p));
      positions.push_back(sensor_position(x0 + kWindow / 2.0, y0 + kWindow / 2.0, img.width(), img.height()));
    }
  const auto preds = predict(model, patches, positions);
  const BlurRange range = invertible_blur_range(lens);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto [ix, iy] = cells[i];
    const Prediction& p = preds[i];
    map.blur_px.at(ix, iy) = static_cast<float>(p.blur.px);
    map.sigma.at(ix, iy) = static_cast<float>(p.sigma);
    if (p.sigma >= sigma_threshold) {
      map.unreliable.at(ix, iy) = 1;
      continue;
    }
    if (p.blur.px > range.far_px && p.blur.px < range.near_px)
      map.distance_mm.at(ix, iy) = static_cast<float>(distance_from_blur(lens, p.blur));
  }
  return map;
}

}  // namespace cca
