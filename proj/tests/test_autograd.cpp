#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cca/autograd/adam.hpp"
#include "cca/autograd/checkpoint.hpp"
#include "cca/autograd/gradcheck.hpp"
#include "cca/autograd/ops.hpp"
#include "cca/error.hpp"
#include "cca/gradcheck_suite.hpp"

using namespace cca;
using namespace cca::ag;

using T = Tensor<double>;

TEST(Autograd, ConvWithCenterTapIsScaledIdentityPlusBias) {
  Tape<double> tape;
  std::vector<double> xs(2 * 1 * 4 * 4);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  const T x = T::from({2, 1, 4, 4}, xs);
  std::vector<double> ws(9, 0.0);
  ws[4] = 2.0;
  const T w = T::from({1, 1, 3, 3}, ws);
  const T b = T::from({1}, {0.5});
  const T y = conv2d(tape, x, w, b);
  ASSERT_EQ(y.shape(), (Shape{2, 1, 4, 4}));
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_DOUBLE_EQ(y.value()[i], 2.0 * xs[i] + 0.5);
}

TEST(Autograd, ConvZeroPadsBorders) {
  Tape<double> tape;
  const T x = T::from({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  const T w = T::from({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  const T y = conv2d(tape, x, w, T::from({1}, {0.0}));
  EXPECT_DOUBLE_EQ(y.value()[0], 4.0);
  EXPECT_DOUBLE_EQ(y.value()[1], 6.0);
  EXPECT_DOUBLE_EQ(y.value()[4], 9.0);
}

TEST(Autograd, DenseMatchesHandComputation) {
  Tape<double> tape;
  const T x = T::from({1, 2}, {1.0, 2.0});
  const T w = T::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
  const T b = T::from({2}, {0.5, -0.5});
  const T y = dense(tape, x, w, b);
  EXPECT_DOUBLE_EQ(y.value()[0], 5.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 10.5);
}

TEST(Autograd, ElementwiseExamples) {
  Tape<double> tape;
  const T x = T::from({3}, {-1.0, 0.0, 2.0});
  const T r = relu(tape, x);
  EXPECT_EQ(std::vector<double>(r.value().begin(), r.value().end()), (std::vector<double>{0.0, 0.0, 2.0}));
  EXPECT_DOUBLE_EQ(sigmoid(tape, x).value()[1], 0.5);
  EXPECT_DOUBLE_EQ(abs(tape, x).value()[0], 1.0);
  EXPECT_DOUBLE_EQ(clamp(tape, x, -0.5, 1.0).value()[0], -0.5);
  EXPECT_DOUBLE_EQ(clamp(tape, x, -0.5, 1.0).value()[2], 1.0);
  EXPECT_DOUBLE_EQ(exp(tape, x).value()[1], 1.0);
  EXPECT_DOUBLE_EQ(mean(tape, x).item(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(sum(tape, x).item(), 1.0);
}

TEST(Autograd, MaxpoolAndGlobalAverage) {
  Tape<double> tape;
  const T x = T::from({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 1});
  const T p = maxpool2(tape, x);
  ASSERT_EQ(p.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(p.value()[0], 5.0);
  EXPECT_DOUBLE_EQ(p.value()[1], 8.0);
  const T g = global_avg_pool(tape, x);
  ASSERT_EQ(g.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(g.item(), 3.0);
  EXPECT_THROW(maxpool2(tape, T::zeros({1, 1, 3, 4})), Error);
}

TEST(Autograd, ConcatAlongChannels) {
  Tape<double> tape;
  const T a = T::from({1, 1, 1, 2}, {1, 2});
  const T b = T::from({1, 2, 1, 2}, {3, 4, 5, 6});
  const T c = concat(tape, std::vector<T>{a, b});
  ASSERT_EQ(c.shape(), (Shape{1, 3, 1, 2}));
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(c.value()[i], i + 1.0);
}

TEST(Autograd, LogOfNonPositiveIsDomainError) {
  Tape<double> tape;
  try {
    log(tape, T::from({1}, {-1.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
}

TEST(Autograd, ShapeMismatchThrows) {
  Tape<double> tape;
  try {
    add(tape, T::zeros({2}), T::zeros({3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(Autograd, ProductRuleAndAccumulation) {
  Tape<double> tape;
  T a = T::from({1}, {3.0}, true);
  T b = T::from({1}, {4.0}, true);
  const T loss = sum(tape, mul(tape, a, b));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(a.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(b.grad()[0], 3.0);
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(a.grad()[0], 8.0);
  a.zero_grad();
  EXPECT_DOUBLE_EQ(a.grad()[0], 0.0);
}

TEST(Autograd, SharedInputGradientsAdd) {
  Tape<double> tape;
  T x = T::from({1}, {2.0}, true);
  tape.backward(sum(tape, add(tape, mul(tape, x, x), scale(tape, x, 3.0))));
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autograd, NoRecordingWithoutGradInputs) {
  Tape<double> tape;
  const T x = T::from({2}, {1.0, 2.0});
  relu(tape, x);
  EXPECT_EQ(tape.size(), 0u);
  Tape<double> off(false);
  relu(off, T::from({1}, {1.0}, true));
  EXPECT_EQ(off.size(), 0u);
}

TEST(Autograd, CheckFiniteFlagsOverflow) {
  Tape<double> tape;
  const T x = T::from({1}, {1000.0}, true);
  exp(tape, x);
  EXPECT_THROW(tape.check_finite(), Error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<T> params{T::from({2}, {1.0, -1.0}, true)};
  params[0].grad()[0] = 0.3;
  params[0].grad()[1] = -20.0;
  AdamState<double> st;
  AdamOptions opt;
  opt.lr = 0.01;
  adam_step<double>(params, st, opt);
  EXPECT_NEAR(params[0].value()[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(params[0].value()[1], -1.0 + 0.01, 1e-9);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, MinimizesQuadratic) {
  std::vector<T> params{T::from({1}, {5.0}, true)};
  AdamState<double> st;
  AdamOptions opt;
  opt.lr = 0.1;
  for (int i = 0; i < 500; ++i) {
    params[0].zero_grad();
    params[0].grad()[0] = 2.0 * (params[0].value()[0] - 1.5);
    adam_step<double>(params, st, opt);
  }
  EXPECT_NEAR(params[0].value()[0], 1.5, 1e-2);
}

TEST(Adam, IsDeterministic) {
  auto run = [] {
    std::vector<T> params{T::from({3}, {0.1, 0.2, 0.3}, true)};
    AdamState<double> st;
    for (int i = 0; i < 10; ++i) {
      for (int k = 0; k < 3; ++k) params[0].grad()[k] = std::sin(params[0].value()[k] * (i + 1));
      adam_step<double>(params, st, {});
    }
    return std::vector<double>(params[0].value().begin(), params[0].value().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const std::vector<NamedTensor> ts{{"a.w", {2, 3}, {1, 2, 3, 4, 5, 6}}, {"a.b", {2}, {-1.5f, 0.25f}}};
  const auto bytes = encode_checkpoint(ts);
  const auto back = decode_checkpoint(bytes);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].name, ts[i].name);
    EXPECT_EQ(back[i].shape, ts[i].shape);
    EXPECT_EQ(back[i].data, ts[i].data);
  }
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(decode_checkpoint(cut), Error);
  auto bad = bytes;
  bad[0] = std::byte{'X'};
  EXPECT_THROW(decode_checkpoint(bad), Error);
}

TEST(Gradcheck, SquareAgreesWithAnalytic) {
  std::vector<T> leaves{T::from({3}, {0.3, -0.7, 1.1}, true)};
  const auto good = gradcheck(leaves, [&](Tape<double>& t) { return sum(t, mul(t, leaves[0], leaves[0])); });
  EXPECT_LT(good.max_rel_error, 1e-8);
  EXPECT_EQ(good.checked, 3u);
}

TEST(Gradcheck, SuiteCoversEveryOpAndPasses) {
  const auto rows = run_gradcheck_suite(1);
  std::vector<std::string> names;
  for (const auto& r : rows) {
    names.push_back(r.name);
    EXPECT_TRUE(r.passed()) << r.name << " " << r.max_rel_error;
  }
  for (const char* op : {"conv2d", "dense", "relu", "sigmoid", "abs", "log", "exp", "scale", "clamp", "add",
                         "sub", "mul", "concat", "maxpool2", "global_avg_pool", "sum", "mean", "loss_l1",
                         "loss_bayes_l1", "loss_bayes_l2", "ddn_end_to_end"})
    EXPECT_NE(std::find(names.begin(), names.end(), op), names.end()) << op;
}
