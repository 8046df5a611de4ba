#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "cca/ddn.hpp"
#include "cca/error.hpp"
#include "cca/rng.hpp"

using namespace cca;
namespace fs = std::filesystem;

namespace {

DdnConfig tiny(bool positional = true, bool color = true) {
  DdnConfig c;
  c.channels = 4;
  c.resblocks = 1;
  c.positional = positional;
  c.color = color;
  return c;
}

std::vector<float> random_patch(std::uint64_t seed, int side = 16) {
  Rng rng(seed);
  std::vector<float> p(3 * static_cast<std::size_t>(side) * side);
  for (float& v : p) v = static_cast<float>(rng.uniform());
  return p;
}

template <typename T>
DdnBatch<T> sample_batch(std::vector<SensorPos> pos) {
  std::vector<std::vector<float>> patches;
  std::vector<double> targets;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    patches.push_back(random_patch(100 + i));
    targets.push_back(static_cast<double>(i));
  }
  return make_batch<T>(patches, pos, targets, InputMode::Gradients);
}

template <typename M>
void set_head(M& model, bool positional, float weight, float bias) {
  auto& head = positional ? model.pos_head() : model.color_head();
  for (auto& w : head.w.value()) w = weight;
  for (auto& b : head.b.value()) b = bias;
}

double scalar(const ag::Tensor<double>& t) { return t.item(); }

}  // namespace

TEST(DdnInputs, GradientsOfRampAndBroadcastPosition) {
  std::vector<float> patch(3 * 256);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) patch[(c * 16 + y) * 16 + x] = 0.01f * static_cast<float>(x);
  const Preprocessed p = preprocess(patch, 16, {0.25, -0.5});
  // interior x-gradient of a ramp is its slope; borders see half of it
  EXPECT_NEAR(p.grad_stack[0 * 256 + 5 * 16 + 7], 0.01, 1e-7);
  EXPECT_NEAR(p.grad_stack[0 * 256 + 5 * 16 + 0], 0.005, 1e-7);
  EXPECT_NEAR(p.grad_stack[1 * 256 + 5 * 16 + 7], 0.0, 1e-12);
  for (int i = 0; i < 256; ++i) {
    EXPECT_DOUBLE_EQ(p.pos_maps[i], 0.25);
    EXPECT_DOUBLE_EQ(p.pos_maps[256 + i], -0.5);
  }
  EXPECT_THROW(preprocess(std::vector<float>(10), 16, {}), Error);
}

TEST(DdnInputs, HueSaturation) {
  double h, s;
  hue_saturation(1.0, 0.0, 0.0, h, s);
  EXPECT_DOUBLE_EQ(h, 0.0);
  EXPECT_DOUBLE_EQ(s, 1.0);
  hue_saturation(0.0, 1.0, 0.0, h, s);
  EXPECT_NEAR(h, 1.0 / 3.0, 1e-12);
  hue_saturation(0.0, 0.0, 1.0, h, s);
  EXPECT_NEAR(h, 2.0 / 3.0, 1e-12);
  hue_saturation(1.0, 0.0, 1.0, h, s);
  EXPECT_NEAR(h, 5.0 / 6.0, 1e-12);
  hue_saturation(0.4, 0.4, 0.4, h, s);
  EXPECT_DOUBLE_EQ(h, 0.0);
  EXPECT_DOUBLE_EQ(s, 0.0);
  hue_saturation(0.0, 0.0, 0.0, h, s);
  EXPECT_DOUBLE_EQ(s, 0.0);
  hue_saturation(1.0, 0.5, 0.5, h, s);
  EXPECT_DOUBLE_EQ(s, 0.5);
}

TEST(DdnInputs, RawModeUsesIntensities) {
  const auto patch = random_patch(4);
  const auto b = make_batch<double>({patch}, {{0, 0}}, {1.0}, InputMode::Raw);
  ASSERT_EQ(b.main.dim(1), 3u);
  for (std::size_t i = 0; i < patch.size(); ++i) EXPECT_DOUBLE_EQ(b.main.value()[i], patch[i]);
  EXPECT_DOUBLE_EQ(b.target.value()[0], 1.0);
}

TEST(DdnConfigTest, ValidateRejectsBadValues) {
  DdnConfig c = tiny();
  EXPECT_NO_THROW(c.validate());
  c.channels = 0;
  EXPECT_THROW(c.validate(), Error);
  c = tiny();
  c.log_sigma_min = 1.0;
  c.log_sigma_max = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(DdnModelTest, ParameterNamesFollowBranches) {
  const DdnModel<float> full(tiny(), 1);
  const DdnModel<float> bare(tiny(false, false), 1);
  const auto n = full.names();
  EXPECT_EQ(n.size(), full.parameters().size());
  EXPECT_EQ(std::set<std::string>(n.begin(), n.end()).size(), n.size());
  EXPECT_NE(std::find(n.begin(), n.end(), "pos_head.w"), n.end());
  EXPECT_NE(std::find(n.begin(), n.end(), "color_block0.conv2.b"), n.end());
  const auto m = bare.names();
  EXPECT_EQ(std::find(m.begin(), m.end(), "pos_head.w"), m.end());
  EXPECT_LT(m.size(), n.size());
}

TEST(DdnModelTest, SameSeedSameWeights) {
  const DdnModel<float> a(tiny(), 7), b(tiny(), 7), c(tiny(), 8);
  const auto ea = a.export_tensors(), eb = b.export_tensors(), ec = c.export_tensors();
  bool differ = false;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    EXPECT_EQ(ea[i].data, eb[i].data);
    differ = differ || ea[i].data != ec[i].data;
  }
  EXPECT_TRUE(differ);
}

TEST(DdnModelTest, OutputShapes) {
  const DdnModel<double> model(tiny(), 3);
  ag::Tape<double> tape(false);
  const auto out = model.forward(tape, sample_batch<double>({{0, 0}, {0.5, 0.5}, {-1, 1}}));
  EXPECT_EQ(out.blur.shape(), (ag::Shape{3, 1}));
  EXPECT_EQ(out.log_sigma.shape(), (ag::Shape{3, 1}));
  EXPECT_EQ(out.attention_pos.shape(), (ag::Shape{3, 4, 16, 16}));
  EXPECT_THROW(model.forward(tape, make_batch<double>({random_patch(1)}, {{0, 0}}, {0.0}, InputMode::Raw)), Error);
}

TEST(DdnModelTest, SaturatedAttentionMatchesModelWithoutBranch) {
  DdnModel<float> full(tiny(true, true), 5);
  set_head(full, true, 0.0f, 50.0f);
  DdnModel<float> nopos(tiny(false, true), 6);
  std::vector<ag::NamedTensor> shared;
  const auto names = nopos.names();
  for (const auto& t : full.export_tensors())
    if (std::find(names.begin(), names.end(), t.name) != names.end()) shared.push_back(t);
  nopos.import_tensors(shared);

  const auto batch = sample_batch<float>({{0.1, 0.2}, {-0.9, 0.7}});
  ag::Tape<float> t1(false), t2(false);
  const auto a = full.forward(t1, batch);
  const auto b = nopos.forward(t2, batch);
  for (float v : a.attention_pos.value()) EXPECT_EQ(v, 1.0f);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.blur.value()[i], b.blur.value()[i]);
    EXPECT_EQ(a.log_sigma.value()[i], b.log_sigma.value()[i]);
  }
}

TEST(DdnModelTest, ZeroHeadGivesHalfAttentionIndependentOfPosition) {
  DdnModel<double> model(tiny(true, false), 9);
  set_head(model, true, 0.0, 0.0);
  ag::Tape<double> tape(false);
  const auto a = model.forward(tape, sample_batch<double>({{0.0, 0.0}}));
  const auto b = model.forward(tape, sample_batch<double>({{0.9, -0.9}}));
  for (double v : a.attention_pos.value()) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(a.blur.item(), b.blur.item());
}

TEST(DdnModelTest, ImportRejectsWrongShapes) {
  DdnModel<float> a(tiny(), 1);
  const DdnModel<float> b(tiny(true, false), 1);
  try {
    a.import_tensors(b.export_tensors());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Mismatch);
  }
}

TEST(DdnModelTest, CastAndClonePreserveOutputs) {
  const DdnModel<float> f(tiny(), 2);
  const DdnModel<double> d = f.cast<double>();
  const DdnModel<float> c = f.clone();
  ag::Tape<float> tf(false);
  ag::Tape<double> td(false);
  const auto of = f.forward(tf, sample_batch<float>({{0.3, 0.3}}));
  const auto oc = c.forward(tf, sample_batch<float>({{0.3, 0.3}}));
  const auto od = d.forward(td, sample_batch<double>({{0.3, 0.3}}));
  EXPECT_EQ(of.blur.item(), oc.blur.item());
  EXPECT_NEAR(of.blur.item(), od.blur.item(), 1e-4);
}

TEST(DdnModelTest, SaveLoadRoundTrip) {
  const DdnModel<float> model(tiny(), 4);
  LensConfig lens;
  lens.focus_distance_mm = 1600.0;
  const fs::path dir = fs::temp_directory_path() / "cca_test_model";
  fs::create_directories(dir);
  save_model(dir / "m.ccaw", model, lens);
  EXPECT_TRUE(fs::exists(dir / "m.ccaw.cfg"));
  EXPECT_TRUE(fs::exists(dir / "m.ccaw.txt"));
  const LoadedModel back = load_model(dir / "m.ccaw");
  EXPECT_EQ(back.model.config(), model.config());
  EXPECT_DOUBLE_EQ(back.lens.focus_distance_mm, 1600.0);
  const auto ea = model.export_tensors(), eb = back.model.export_tensors();
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(ea[i].data, eb[i].data);
  fs::remove_all(dir);
}

TEST(DdnLoss, L1Example) {
  ag::Tape<double> tape;
  const auto b = ag::Tensor<double>::from({3, 1}, {1.0, -2.0, 0.5});
  const auto t = ag::Tensor<double>::from({3, 1}, {0.0, 0.0, 0.5});
  EXPECT_DOUBLE_EQ(scalar(loss_l1(tape, b, t)), 1.0);
}

TEST(DdnLoss, BayesExamples) {
  ag::Tape<double> tape;
  const auto b = ag::Tensor<double>::from({1, 1}, {3.0});
  const auto t = ag::Tensor<double>::from({1, 1}, {1.0});
  const auto s0 = ag::Tensor<double>::from({1, 1}, {0.0});
  EXPECT_DOUBLE_EQ(scalar(loss_bayes_l1(tape, b, s0, t)), 1.0);
  EXPECT_DOUBLE_EQ(scalar(loss_bayes_l2(tape, b, s0, t)), 2.0);
  const auto s1 = ag::Tensor<double>::from({1, 1}, {1.0});
  EXPECT_NEAR(scalar(loss_bayes_l1(tape, b, s1, t)), 0.5 * (2.0 / std::exp(1.0) + 1.0), 1e-12);
  EXPECT_NEAR(scalar(loss_bayes_l2(tape, b, s1, t)), 0.5 * (4.0 / std::exp(2.0) + 2.0), 1e-12);
}

TEST(DdnLoss, MinimizersSitAtAbsoluteError) {
  // Golden-section search over s for |e| = 2.
  auto minimize = [](auto f) {
    double lo = -5.0, hi = 5.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 200; ++i) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (f(a) < f(b))
        hi = b;
      else
        lo = a;
    }
    return 0.5 * (lo + hi);
  };
  auto eval = [](bool l2, double s) {
    ag::Tape<double> tape;
    const auto b = ag::Tensor<double>::from({1, 1}, {2.0});
    const auto t = ag::Tensor<double>::from({1, 1}, {0.0});
    const auto ls = ag::Tensor<double>::from({1, 1}, {s});
    return scalar(l2 ? loss_bayes_l2(tape, b, ls, t) : loss_bayes_l1(tape, b, ls, t));
  };
  const double s1 = minimize([&](double s) { return eval(false, s); });
  const double s2 = minimize([&](double s) { return eval(true, s); });
  EXPECT_NEAR(std::exp(s1), 2.0, 1e-3);
  EXPECT_NEAR(std::exp(s2), 2.0, 1e-3);
  EXPECT_NEAR(eval(false, s1), 0.8466, 1e-4);
  EXPECT_NEAR(eval(true, s2), 1.1931, 1e-4);
}

TEST(DdnLoss, BayesL1GradientOnBlur) {
  ag::Tape<double> tape;
  auto b = ag::Tensor<double>::from({4, 1}, {0.0, 1.0, 2.0, -1.0}, true);
  const auto t = ag::Tensor<double>::from({4, 1}, {1.0, 3.0, 5.0, 0.0});
  const auto s = ag::Tensor<double>::zeros({4, 1});
  tape.backward(loss_bayes_l1(tape, b, s, t));
  for (double g : b.grad()) EXPECT_DOUBLE_EQ(g, -0.5 / 4.0);
}

TEST(DdnLoss, RawSigmaUsesLogAbs) {
  DdnConfig c = tiny(false, false);
  c.sigma_param = SigmaParam::Raw;
  const DdnModel<double> model(c, 1);
  ag::Tape<double> tape(false);
  const auto out = model.forward(tape, sample_batch<double>({{0, 0}}));
  EXPECT_NEAR(out.log_sigma.item(), std::log(std::abs(out.raw_sigma.item())), 1e-12);
}

TEST(Augment, IdentityIsCenterCrop) {
  PatchSample s;
  s.side = 20;
  s.patch = random_patch(3, 20);
  const auto a = apply_augment(s, identity_augment(20));
  const auto b = center_crop(s);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 3u * 256);
  EXPECT_EQ(a[0], s.value(0, 2, 2));
  EXPECT_EQ(a[(2 * 16 + 15) * 16 + 15], s.value(2, 17, 17));
}

TEST(Augment, SeededDrawsRepeat) {
  PatchSample s;
  s.side = 20;
  s.patch = random_patch(5, 20);
  Rng r1(42), r2(42);
  const AugmentOptions opts;
  for (int i = 0; i < 20; ++i) EXPECT_EQ(augment(s, r1, opts), augment(s, r2, opts));
}

TEST(Augment, EraseFillsConstantRectangle) {
  PatchSample s;
  s.side = 16;
  s.patch = random_patch(6);
  AugmentDraw d = identity_augment(16);
  d.erase = true;
  d.erase_x = 3;
  d.erase_y = 4;
  d.erase_w = 5;
  d.erase_h = 2;
  d.erase_value = 0.25f;
  const auto out = apply_augment(s, d);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const bool in = x >= 3 && x < 8 && y >= 4 && y < 6;
        const float v = out[(c * 16 + y) * 16 + x];
        if (in)
          EXPECT_EQ(v, 0.25f);
        else
          EXPECT_EQ(v, s.value(c, x, y));
      }
}

TEST(Augment, BrightnessScalesAndClamps) {
  PatchSample s;
  s.side = 16;
  s.patch = random_patch(7);
  AugmentDraw d = identity_augment(16);
  d.brightness = 1.25;
  const auto out = apply_augment(s, d);
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_FLOAT_EQ(out[i], std::min(1.0f, static_cast<float>(s.patch[i] * 1.25)));
}

TEST(Augment, DrawsStayInRange) {
  Rng rng(1);
  AugmentOptions opts;
  opts.erase_prob = 1.0;
  for (int i = 0; i < 200; ++i) {
    const AugmentDraw d = draw_augment(rng, 20, opts);
    EXPECT_GE(d.crop_x, 0);
    EXPECT_LE(d.crop_x, 4);
    EXPECT_GE(d.brightness, 0.8);
    EXPECT_LE(d.brightness, 1.25);
    EXPECT_TRUE(d.erase);
    EXPECT_LE(d.erase_x + d.erase_w, 16);
    EXPECT_LE(d.erase_y + d.erase_h, 16);
  }
  EXPECT_THROW(draw_augment(rng, 12, opts), Error);
}
