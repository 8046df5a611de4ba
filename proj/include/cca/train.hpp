#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cca/autograd/adam.hpp"
#include "cca/ddn.hpp"
#include "cca/dfad.hpp"
#include "cca/image.hpp"
#include "cca/render.hpp"

namespace cca {

class Config;

struct TrainConfig {
  int batch = 128;
  int epochs = 40;
  ag::AdamOptions adam;
  bool augment = true;
  AugmentOptions aug;
  bool check_finite = true;
  bool record_wall_time = false;
  std::uint64_t seed = 1;
  /// Accuracy tolerance for the per-epoch test metric.
  double acc_tolerance_px = 0.25;
};

TrainConfig train_config_from(const Config& cfg, const LensConfig& lens);

/// Blur-equivalent of `tolerance_mm` nearer than the focus distance.
double accuracy_tolerance_px(const LensConfig& lens, double tolerance_mm);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  /// Mean weighted error term: exp(-s)|e| (Bayes L1), exp(-2s)e^2 (Bayes L2),
  /// |e| (L1). Positive, and near 1 for calibrated reliabilities.
  double train_fit = 0.0;
  double test_mae_px = 0.0;
  double test_acc = 0.0;
  double wall_s = 0.0;
};

struct TrainResult {
  /// Parameters at the epoch with the lowest test MAE (last epoch without a test set).
  DdnModel<float> best;
  int best_epoch = 0;
  std::vector<EpochLog> log;
  bool aborted = false;
  std::string abort_reason;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Seeded mini-batch ADAM training. A non-finite loss, value or gradient
/// stops training and is reported through `aborted`.
TrainResult train(const DdnConfig& arch, const TrainConfig& cfg, const std::vector<PatchSample>& train_set,
                  const std::vector<PatchSample>& test_set, const EpochCallback& on_epoch = {});

/// CSV: epoch,train_loss,test_mae_px,test_acc,wall_s
std::string training_log_csv(const std::vector<EpochLog>& log);

struct DdnDepthMap {
  int stride = 8;
  int window = 16;
  /// NaN where masked (no cue, unreliable, or outside the invertible range).
  Grid<float> distance_mm;
  Grid<float> blur_px;
  /// |sigma|; NaN where no cue.
  Grid<float> sigma;
  Grid<std::uint8_t> no_cue;
  Grid<std::uint8_t> unreliable;
};

DdnDepthMap ddn_depth_map(const DdnModel<float>& model, const RgbImage& img, const LensConfig& lens, int stride,
                          double sigma_threshold, double grad_threshold);

}  // namespace cca
