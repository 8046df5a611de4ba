#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cca/dataset.hpp"
#include "cca/ddn.hpp"
#include "cca/dfad.hpp"
#include "cca/train.hpp"

namespace cca {

struct SampleEstimate {
  SignedBlur blur;
  double sigma = std::numeric_limits<double>::quiet_NaN();
  /// False when the estimator declined the sample (masked).
  bool valid = true;
};

struct EvalOptions {
  double radial_split = 0.5;
  double acc_tolerance_px = 0.25;
};

struct BinMetrics {
  double distance_mm = 0.0;
  double gt_blur_px = 0.0;
  std::size_t count = 0;
  std::size_t evaluated = 0;
  double mae_px = 0.0;
  double mae_mm = 0.0;
  double acc = 0.0;
};

struct BandMetrics {
  std::size_t count = 0;
  double mae_px = 0.0;
  double mae_mm = 0.0;
};

struct MetricsReport {
  std::vector<BinMetrics> bins;
  std::size_t count = 0;
  std::size_t evaluated = 0;
  double mae_px = 0.0;
  double mae_mm = 0.0;
  double acc = 0.0;
  double masked_fraction = 0.0;
  BandMetrics center;
  BandMetrics periphery;
};

/// Aggregates per distance bin and per radial band. Distance errors compare
/// distance_from_blur of the estimate and of the label, with estimates
/// clamped into the invertible range.
MetricsReport evaluate(const std::vector<PatchSample>& samples, const std::vector<SampleEstimate>& estimates,
                       const LensConfig& lens, const EvalOptions& opts);

/// Throws ErrorKind::Mismatch when the two lens configurations differ.
void require_same_lens(const LensConfig& a, const LensConfig& b, const std::string& what);

std::vector<SampleEstimate> estimate_ddn(const DdnModel<float>& model, const std::vector<PatchSample>& samples);
/// DfAD on the central 16x16 window of each stored patch, with the margin as context.
std::vector<SampleEstimate> estimate_dfad(const std::vector<PatchSample>& samples, const LensConfig& lens,
                                          const BlurSearchSpec& spec, double grad_threshold, int workers = 1);
std::vector<SampleEstimate> estimate_oracle(const std::vector<PatchSample>& samples);
std::vector<SampleEstimate> estimate_zero(const std::vector<PatchSample>& samples);

/// Per-bin CSV followed by overall and band rows.
std::string metrics_csv(const MetricsReport& r);
std::string metrics_summary(const MetricsReport& r);

struct AblationVariant {
  std::string name;
  DdnConfig arch;
};

/// full, no_positional, no_color, raw_input, l1_loss.
std::vector<AblationVariant> ablation_variants(const DdnConfig& base);

struct AblationRow {
  std::string name;
  bool ok = true;
  std::string note;
  int epochs_run = 0;
  int best_epoch = 0;
  double final_train_loss = std::numeric_limits<double>::quiet_NaN();
  MetricsReport test;
  MetricsReport saturated;
  MetricsReport gray;
  bool has_color_splits = false;
};

using VariantCallback = std::function<void(const std::string& variant, const EpochLog&)>;

/// Trains every variant from the same seed on the same data. A variant whose
/// training aborts is reported with ok=false and the suite continues.
std::vector<AblationRow> ablation_suite(const std::vector<AblationVariant>& variants, const TrainConfig& train_cfg,
                                        const Dataset& ds, const EvalOptions& opts,
                                        const VariantCallback& on_epoch = {});
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct LossStability {
  std::size_t epochs = 0;
  double median = 0.0;
  double max = 0.0;
  /// max / median over the considered epochs.
  double spike_ratio = 1.0;
  /// Epochs whose loss exceeds 10x the median.
  int spikes = 0;
  bool completed = true;
};

/// Statistics over `losses[skip:]`. Losses must be positive.
LossStability loss_stability(const std::vector<double>& losses, bool completed, std::size_t skip = 0);

}  // namespace cca

namespace cca {

/// 16-bit depth image: [near_mm, far_mm] maps to 1..65535, NaN to 0.
Grid<std::uint16_t> encode_depth(const Grid<float>& distance_mm, double near_mm, double far_mm);
/// 16-bit reliability image: log|sigma| over [-6, 6] maps to 1..65535, NaN to 0.
Grid<std::uint16_t> encode_reliability(const Grid<float>& sigma);

}  // namespace cca
