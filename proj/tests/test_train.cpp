#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cca/error.hpp"
#include "cca/render.hpp"
#include "cca/rng.hpp"
#include "cca/texture.hpp"
#include "cca/train.hpp"

using namespace cca;

namespace {

DdnConfig tiny() {
  DdnConfig c;
  c.channels = 4;
  c.resblocks = 1;
  return c;
}

std::vector<PatchSample> random_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PatchSample> out(n);
  for (auto& s : out) {
    s.side = 16;
    s.patch.resize(3 * 256);
    for (float& v : s.patch) v = static_cast<float>(rng.uniform());
    s.pos = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    s.gt_blur = {rng.uniform(-6, 6)};
  }
  return out;
}

}  // namespace

TEST(Train, OverfitsSingleSample) {
  const auto one = random_samples(1, 3);
  TrainConfig cfg;
  cfg.batch = 1;
  cfg.epochs = 200;
  cfg.augment = false;
  cfg.adam.lr = 1e-2;
  DdnConfig arch = tiny();
  arch.loss = LossKind::L1;
  const TrainResult r = train(arch, cfg, one, one);
  ASSERT_FALSE(r.aborted) << r.abort_reason;
  ASSERT_EQ(r.log.size(), 200u);
  EXPECT_LT(r.log[r.best_epoch - 1].test_mae_px, 0.01);
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
}

TEST(Train, LogIsDeterministic) {
  const auto tr = random_samples(24, 4);
  const auto te = random_samples(8, 5);
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.epochs = 3;
  auto a = train(tiny(), cfg, tr, te);
  auto b = train(tiny(), cfg, tr, te);
  EXPECT_EQ(training_log_csv(a.log), training_log_csv(b.log));
  const auto ea = a.best.export_tensors(), eb = b.best.export_tensors();
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(ea[i].data, eb[i].data);
  cfg.seed = 2;
  EXPECT_NE(training_log_csv(train(tiny(), cfg, tr, te).log), training_log_csv(a.log));
}

TEST(Train, CsvHeaderAndRows) {
  std::vector<EpochLog> log(2);
  log[0] = {1, 0.5, 1.0, 2.0, 0.25, 0.0};
  log[1] = {2, 0.25, 1.0, 1.5, 0.5, 0.0};
  const std::string csv = training_log_csv(log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,test_mae_px,test_acc,wall_s");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Train, EmptyTrainingSetIsRejected) {
  EXPECT_THROW(train(tiny(), TrainConfig{}, {}, {}), Error);
}

TEST(Train, AccuracyToleranceIsBlurOfOffset) {
  const LensConfig lens;
  EXPECT_NEAR(accuracy_tolerance_px(lens, 8.1),
              std::abs(ideal_blur(lens, lens.focus_distance_mm - 8.1).px), 1e-12);
}

TEST(DdnMap, FlatImageIsNoCueEverywhere) {
  const DdnModel<float> model(tiny(), 1);
  const LensConfig lens;
  const DdnDepthMap map = ddn_depth_map(model, RgbImage(48, 32, 0.5), lens, 16, 1.0, 0.02);
  EXPECT_EQ(map.no_cue.width(), 3);
  EXPECT_EQ(map.no_cue.height(), 2);
  for (auto v : map.no_cue.values()) EXPECT_EQ(v, 1);
  for (auto v : map.distance_mm.values()) EXPECT_TRUE(std::isnan(v));
}

TEST(DdnMap, ThresholdMasksUnreliableWindows) {
  const DdnModel<float> model(tiny(), 1);
  const LensConfig lens;
  Rng rng(2);
  const RgbImage tex = procedural_texture(64, 64, Palette::Gray, rng);
  const DdnDepthMap strict = ddn_depth_map(model, tex, lens, 16, 0.0, 0.0);
  for (std::size_t i = 0; i < strict.unreliable.size(); ++i) {
    EXPECT_EQ(strict.unreliable.values()[i], 1);
    EXPECT_TRUE(std::isnan(strict.distance_mm.values()[i]));
    EXPECT_FALSE(std::isnan(strict.sigma.values()[i]));
  }
  const DdnDepthMap loose = ddn_depth_map(model, tex, lens, 16, 1e9, 0.0);
  for (auto v : loose.unreliable.values()) EXPECT_EQ(v, 0);
}
