#include "cca/gradcheck_suite.hpp"

#include "cca/autograd/gradcheck.hpp"
#include "cca/autograd/ops.hpp"
#include "cca/ddn.hpp"
#include "cca/rng.hpp"

namespace cca {

namespace {

using ag::Tape;
using ag::Tensor;
using T = Tensor<double>;

// Values in [lo, hi] with magnitude at least `gap`, keeping kinks out of reach of eps.
T random_leaf(ag::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, double gap = 0.05) {
  std::vector<double> v(ag::numel(shape));
  for (auto& x : v) {
    do x = rng.uniform(lo, hi);
    while (std::abs(x) < gap);
  }
  return T::from(std::move(shape), std::move(v), true);
}

T constant(ag::Shape shape, Rng& rng) {
  std::vector<double> v(ag::numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return T::from(std::move(shape), std::move(v), false);
}

// ReLU and max-pool kinks are dense in a full network; a smaller step keeps
// the central difference from straddling one.
constexpr double kEndToEndEps = 1e-6;

// Weighted sum, so every output element gets a distinct upstream gradient.
T project(Tape<double>& tape, const T& y, const T& weights) { return ag::sum(tape, ag::mul(tape, y, weights)); }

}  // namespace

std::vector<GradcheckRow> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<GradcheckRow> rows;
  auto record = [&](const std::string& name, const ag::GradcheckResult& r, double tol = 1e-4) {
    rows.push_back({name, r.max_rel_error, r.checked, tol});
  };
  Rng rng(seed);

  {
    auto x = random_leaf({2, 3, 6, 6}, rng), w = random_leaf({4, 3, 3, 3}, rng), b = random_leaf({4}, rng);
    auto r = constant({2, 4, 6, 6}, rng);
    record("conv2d", ag::gradcheck({x, w, b}, [&](Tape<double>& t) { return project(t, ag::conv2d(t, x, w, b), r); }));
  }
  {
    auto x = random_leaf({3, 5}, rng), w = random_leaf({2, 5}, rng), b = random_leaf({2}, rng);
    auto r = constant({3, 2}, rng);
    record("dense", ag::gradcheck({x, w, b}, [&](Tape<double>& t) { return project(t, ag::dense(t, x, w, b), r); }));
  }
  auto unary = [&](const std::string& name, auto op, double lo, double hi) {
    auto x = random_leaf({4, 6}, rng, lo, hi);
    auto r = constant({4, 6}, rng);
    record(name, ag::gradcheck({x}, [&](Tape<double>& t) { return project(t, op(t, x), r); }));
  };
  unary("relu", [](Tape<double>& t, const T& x) { return ag::relu(t, x); }, -1.0, 1.0);
  unary("sigmoid", [](Tape<double>& t, const T& x) { return ag::sigmoid(t, x); }, -3.0, 3.0);
  unary("abs", [](Tape<double>& t, const T& x) { return ag::abs(t, x); }, -1.0, 1.0);
  unary("log", [](Tape<double>& t, const T& x) { return ag::log(t, x); }, 0.1, 2.0);
  unary("exp", [](Tape<double>& t, const T& x) { return ag::exp(t, x); }, -2.0, 2.0);
  unary("scale", [](Tape<double>& t, const T& x) { return ag::scale(t, x, -1.7); }, -1.0, 1.0);
  unary("clamp", [](Tape<double>& t, const T& x) { return ag::clamp(t, x, -0.5, 0.5); }, -1.0, 1.0);
  auto binary = [&](const std::string& name, auto op) {
    auto a = random_leaf({3, 4}, rng), b = random_leaf({3, 4}, rng);
    auto r = constant({3, 4}, rng);
    record(name, ag::gradcheck({a, b}, [&](Tape<double>& t) { return project(t, op(t, a, b), r); }));
  };
  binary("add", [](Tape<double>& t, const T& a, const T& b) { return ag::add(t, a, b); });
  binary("sub", [](Tape<double>& t, const T& a, const T& b) { return ag::sub(t, a, b); });
  binary("mul", [](Tape<double>& t, const T& a, const T& b) { return ag::mul(t, a, b); });
  {
    auto a = random_leaf({2, 2, 4, 4}, rng), b = random_leaf({2, 3, 4, 4}, rng);
    auto r = constant({2, 5, 4, 4}, rng);
    record("concat", ag::gradcheck({a, b}, [&](Tape<double>& t) { return project(t, ag::concat(t, {a, b}), r); }));
  }
  {
    auto x = random_leaf({2, 3, 6, 6}, rng);
    auto r = constant({2, 3, 3, 3}, rng);
    record("maxpool2", ag::gradcheck({x}, [&](Tape<double>& t) { return project(t, ag::maxpool2(t, x), r); }));
  }
  {
    auto x = random_leaf({2, 3, 4, 4}, rng);
    auto r = constant({2, 3}, rng);
    record("global_avg_pool",
           ag::gradcheck({x}, [&](Tape<double>& t) { return project(t, ag::global_avg_pool(t, x), r); }));
  }
  {
    auto x = random_leaf({3, 4}, rng);
    auto r = constant({3, 4}, rng);
    record("sum", ag::gradcheck({x}, [&](Tape<double>& t) { return ag::sum(t, ag::mul(t, x, r)); }));
    record("mean", ag::gradcheck({x}, [&](Tape<double>& t) { return ag::mean(t, ag::mul(t, x, x)); }));
  }
  {
    auto b = random_leaf({8, 1}, rng, -3.0, 3.0), s = random_leaf({8, 1}, rng, -1.0, 1.0);
    std::vector<double> tv(8);
    for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = b.value()[i] + (i % 2 ? 0.5 : -0.7);
    auto target = T::from({8, 1}, tv, false);
    record("loss_l1", ag::gradcheck({b}, [&](Tape<double>& t) { return loss_l1(t, b, target); }));
    record("loss_bayes_l1", ag::gradcheck({b, s}, [&](Tape<double>& t) { return loss_bayes_l1(t, b, s, target); }));
    record("loss_bayes_l2", ag::gradcheck({b, s}, [&](Tape<double>& t) { return loss_bayes_l2(t, b, s, target); }));
  }
  {
    DdnConfig arch;
    arch.channels = 4;
    arch.resblocks = 1;
    DdnModel<double> model(arch, derive_seed(seed, 7, 0));
    std::vector<std::vector<float>> patches(2, std::vector<float>(768));
    for (auto& p : patches)
      for (auto& v : p) v = static_cast<float>(rng.uniform());
    std::vector<SensorPos> pos = {{0.3, -0.6}, {-0.9, 0.2}};
    auto batch = make_batch<double>(patches, pos, {1.5, -2.0}, arch.input);
    record("ddn_end_to_end",
           ag::gradcheck(model.parameters(),
                         [&](Tape<double>& t) {
                           auto out = model.forward(t, batch);
                           return compute_loss(t, arch.loss, out, batch.target);
                         },
                         kEndToEndEps, 10, derive_seed(seed, 8, 0)),
           1e-3);
  }
  return rows;
}

}  // namespace cca
