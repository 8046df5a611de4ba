#pragma once

// Template definitions for ddn.hpp.

#include <algorithm>
#include <cmath>

#include "cca/ddn.hpp"

namespace cca {

template <typename T>
void fill_inputs(std::span<const float> patch16, SensorPos pos, InputMode mode, T* main, T* pos_out,
                 T* color_out) {
  constexpr int s = 16;
  constexpr int n = s * s;
  if (patch16.size() != 3 * static_cast<std::size_t>(n))
    throw Error(ErrorKind::Shape, "ddn input patch must be 3x16x16");
  auto at = [&](int c, int x, int y) { return static_cast<double>(patch16[(c * s + y) * s + x]); };
  if (mode == InputMode::Gradients) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          const double gx = 0.5 * (at(c, std::min(x + 1, s - 1), y) - at(c, std::max(x - 1, 0), y));
          const double gy = 0.5 * (at(c, x, std::min(y + 1, s - 1)) - at(c, x, std::max(y - 1, 0)));
          main[(2 * c) * n + y * s + x] = static_cast<T>(gx);
          main[(2 * c + 1) * n + y * s + x] = static_cast<T>(gy);
        }
  } else {
    for (int i = 0; i < 3 * n; ++i) main[i] = static_cast<T>(patch16[i]);
  }
  for (int i = 0; i < n; ++i) {
    pos_out[i] = static_cast<T>(pos.x);
    pos_out[n + i] = static_cast<T>(pos.y);
    double hue = 0.0, sat = 0.0;
    hue_saturation(patch16[i], patch16[n + i], patch16[2 * n + i], hue, sat);
    color_out[i] = static_cast<T>(hue);
    color_out[n + i] = static_cast<T>(sat);
  }
}

template <std::floating_point T>
DdnBatch<T> make_batch(const std::vector<std::vector<float>>& patches, const std::vector<SensorPos>& positions,
                       const std::vector<double>& targets, InputMode mode) {
  const std::size_t N = patches.size();
  if (positions.size() != N || (!targets.empty() && targets.size() != N))
    throw Error(ErrorKind::Shape, "make_batch: patches, positions and targets differ in count");
  const std::size_t planes = mode == InputMode::Gradients ? 6 : 3;
  constexpr std::size_t n = 256;
  DdnBatch<T> b;
  b.main = ag::Tensor<T>::zeros({N, planes, 16, 16});
  b.pos = ag::Tensor<T>::zeros({N, 2, 16, 16});
  b.color = ag::Tensor<T>::zeros({N, 2, 16, 16});
  b.target = ag::Tensor<T>::zeros({N, 1});
  for (std::size_t i = 0; i < N; ++i) {
    fill_inputs<T>(patches[i], positions[i], mode, b.main.value().data() + i * planes * n,
                   b.pos.value().data() + i * 2 * n, b.color.value().data() + i * 2 * n);
    if (!targets.empty()) b.target.value()[i] = static_cast<T>(targets[i]);
  }
  return b;
}

namespace detail {

template <std::floating_point T>
ConvLayer<T> he_conv(std::size_t out, std::size_t in, std::size_t k, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in * k * k));
  std::vector<T> w(out * in * k * k);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  ConvLayer<T> l;
  l.w = ag::Tensor<T>::from({out, in, k, k}, std::move(w), true);
  l.b = ag::Tensor<T>::zeros({out}, true);
  return l;
}

template <std::floating_point T>
ConvLayer<T> he_dense(std::size_t out, std::size_t in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  std::vector<T> w(out * in);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  ConvLayer<T> l;
  l.w = ag::Tensor<T>::from({out, in}, std::move(w), true);
  l.b = ag::Tensor<T>::zeros({out}, true);
  return l;
}

template <std::floating_point T>
ag::Tensor<T> apply_conv(ag::Tape<T>& tape, const ConvLayer<T>& l, const ag::Tensor<T>& x) {
  return ag::conv2d(tape, x, l.w, l.b);
}

template <std::floating_point T>
ag::Tensor<T> apply_block(ag::Tape<T>& tape, const ResBlock<T>& blk, const ag::Tensor<T>& x) {
  auto h = ag::relu(tape, apply_conv(tape, blk.first, x));
  return ag::add(tape, x, apply_conv(tape, blk.second, h));
}

template <std::floating_point U, std::floating_point T>
ag::Tensor<U> cast_tensor(const ag::Tensor<T>& t) {
  if (!t.defined()) return {};
  std::vector<U> v(t.value().begin(), t.value().end());
  return ag::Tensor<U>::from(t.shape(), std::move(v), true);
}

}  // namespace detail

template <std::floating_point T>
DdnModel<T>::DdnModel(const DdnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const auto C = static_cast<std::size_t>(cfg_.channels);
  const auto in = static_cast<std::size_t>(cfg_.input_planes());
  auto blocks = [&](std::vector<ResBlock<T>>& out) {
    for (int i = 0; i < cfg_.resblocks; ++i)
      out.push_back({detail::he_conv<T>(C, C, 3, rng), detail::he_conv<T>(C, C, 3, rng)});
  };
  main_stem_ = detail::he_conv<T>(C, in, 3, rng);
  if (cfg_.positional) {
    pos_stem_ = detail::he_conv<T>(C, in + 2, 3, rng);
    blocks(pos_blocks_);
    pos_head_ = detail::he_conv<T>(C, C, 3, rng);
  }
  if (cfg_.color) {
    color_stem_ = detail::he_conv<T>(C, in + 2, 3, rng);
    blocks(color_blocks_);
    color_head_ = detail::he_conv<T>(C, C, 3, rng);
  }
  blocks(trunk_blocks_);
  post_ = detail::he_conv<T>(C, C, 3, rng);
  blur_head_ = detail::he_dense<T>(1, C, rng);
  sigma_head_ = detail::he_dense<T>(1, C, rng);
  if (cfg_.sigma_param == SigmaParam::Raw) sigma_head_.b.value()[0] = T(1);
}

template <std::floating_point T>
ag::Tensor<T> DdnModel<T>::run_branch(ag::Tape<T>& tape, const ConvLayer<T>& stem,
                                      const std::vector<ResBlock<T>>& blocks, const ConvLayer<T>& head,
                                      const ag::Tensor<T>& input) const {
  auto h = detail::apply_conv(tape, stem, input);
  for (const auto& blk : blocks) h = detail::apply_block(tape, blk, h);
  return ag::sigmoid(tape, detail::apply_conv(tape, head, h));
}

template <std::floating_point T>
DdnOutput<T> DdnModel<T>::forward(ag::Tape<T>& tape, const DdnBatch<T>& batch) const {
  if (batch.main.dim(1) != static_cast<std::size_t>(cfg_.input_planes()))
    throw Error(ErrorKind::Shape, "ddn: batch input planes do not match the model input mode");
  DdnOutput<T> out;
  const bool gain = cfg_.input == InputMode::Gradients && cfg_.input_gain != 1.0;
  const auto main = gain ? ag::scale(tape, batch.main, static_cast<T>(cfg_.input_gain)) : batch.main;
  auto x = detail::apply_conv(tape, main_stem_, main);
  if (cfg_.positional) {
    out.attention_pos =
        run_branch(tape, pos_stem_, pos_blocks_, pos_head_, ag::concat(tape, {main, batch.pos}));
    x = ag::mul(tape, x, out.attention_pos);
  }
  if (cfg_.color) {
    out.attention_color =
        run_branch(tape, color_stem_, color_blocks_, color_head_, ag::concat(tape, {main, batch.color}));
    x = ag::mul(tape, x, out.attention_color);
  }
  for (const auto& blk : trunk_blocks_) x = detail::apply_block(tape, blk, x);
  x = detail::apply_conv(tape, post_, x);
  x = ag::relu(tape, ag::maxpool2(tape, x));
  auto feat = ag::global_avg_pool(tape, x);
  out.blur = ag::scale(tape, ag::dense(tape, feat, blur_head_.w, blur_head_.b), static_cast<T>(cfg_.blur_scale));
  out.raw_sigma = ag::dense(tape, feat, sigma_head_.w, sigma_head_.b);
  if (cfg_.sigma_param == SigmaParam::Log)
    out.log_sigma = ag::clamp(tape, out.raw_sigma, static_cast<T>(cfg_.log_sigma_min),
                              static_cast<T>(cfg_.log_sigma_max));
  else
    out.log_sigma = ag::log(tape, ag::abs(tape, out.raw_sigma));
  return out;
}

template <std::floating_point T>
std::vector<std::pair<std::string, const ag::Tensor<T>*>> DdnModel<T>::registry() const {
  std::vector<std::pair<std::string, const ag::Tensor<T>*>> r;
  auto conv = [&](const std::string& name, const ConvLayer<T>& l) {
    r.emplace_back(name + ".w", &l.w);
    r.emplace_back(name + ".b", &l.b);
  };
  auto blocks = [&](const std::string& name, const std::vector<ResBlock<T>>& bs) {
    for (std::size_t i = 0; i < bs.size(); ++i) {
      conv(name + std::to_string(i) + ".conv1", bs[i].first);
      conv(name + std::to_string(i) + ".conv2", bs[i].second);
    }
  };
  conv("main_stem", main_stem_);
  if (cfg_.positional) {
    conv("pos_stem", pos_stem_);
    blocks("pos_block", pos_blocks_);
    conv("pos_head", pos_head_);
  }
  if (cfg_.color) {
    conv("color_stem", color_stem_);
    blocks("color_block", color_blocks_);
    conv("color_head", color_head_);
  }
  blocks("trunk_block", trunk_blocks_);
  conv("post", post_);
  conv("blur_head", blur_head_);
  conv("sigma_head", sigma_head_);
  return r;
}

template <std::floating_point T>
std::vector<std::pair<std::string, ag::Tensor<T>*>> DdnModel<T>::registry() {
  std::vector<std::pair<std::string, ag::Tensor<T>*>> r;
  for (auto& [name, t] : std::as_const(*this).registry()) r.emplace_back(name, const_cast<ag::Tensor<T>*>(t));
  return r;
}

template <std::floating_point T>
std::vector<ag::Tensor<T>> DdnModel<T>::parameters() const {
  std::vector<ag::Tensor<T>> out;
  for (auto& [name, t] : registry()) out.push_back(*t);
  return out;
}

template <std::floating_point T>
std::vector<std::string> DdnModel<T>::names() const {
  std::vector<std::string> out;
  for (auto& [name, t] : registry()) out.push_back(name);
  return out;
}

template <std::floating_point T>
std::vector<ag::NamedTensor> DdnModel<T>::export_tensors() const {
  std::vector<ag::NamedTensor> out;
  for (auto& [name, t] : registry())
    out.push_back({name, t->shape(), std::vector<float>(t->value().begin(), t->value().end())});
  return out;
}

template <std::floating_point T>
void DdnModel<T>::import_tensors(const std::vector<ag::NamedTensor>& tensors) {
  auto reg = registry();
  if (reg.size() != tensors.size())
    throw Error(ErrorKind::Mismatch, "checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                                         std::to_string(reg.size()));
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& [name, t] = reg[i];
    if (tensors[i].name != name || tensors[i].shape != t->shape())
      throw Error(ErrorKind::Mismatch, "checkpoint tensor " + tensors[i].name + " " +
                                           ag::shape_string(tensors[i].shape) + " does not match " + name + " " +
                                           ag::shape_string(t->shape()));
    std::copy(tensors[i].data.begin(), tensors[i].data.end(), t->value().begin());
  }
}

template <std::floating_point T>
DdnModel<T> DdnModel<T>::clone() const {
  return cast<T>();
}

template <std::floating_point T>
template <std::floating_point U>
DdnModel<U> DdnModel<T>::cast() const {
  DdnModel<U> m;
  m.cfg_ = cfg_;
  auto conv = [](const ConvLayer<T>& l) {
    return ConvLayer<U>{detail::cast_tensor<U>(l.w), detail::cast_tensor<U>(l.b)};
  };
  auto blocks = [&](const std::vector<ResBlock<T>>& bs) {
    std::vector<ResBlock<U>> out;
    for (const auto& b : bs) out.push_back({conv(b.first), conv(b.second)});
    return out;
  };
  m.main_stem_ = conv(main_stem_);
  m.pos_stem_ = conv(pos_stem_);
  m.color_stem_ = conv(color_stem_);
  m.pos_blocks_ = blocks(pos_blocks_);
  m.color_blocks_ = blocks(color_blocks_);
  m.trunk_blocks_ = blocks(trunk_blocks_);
  m.pos_head_ = conv(pos_head_);
  m.color_head_ = conv(color_head_);
  m.post_ = conv(post_);
  m.blur_head_ = conv(blur_head_);
  m.sigma_head_ = conv(sigma_head_);
  return m;
}

template <std::floating_point T>
ag::Tensor<T> loss_l1(ag::Tape<T>& tape, const ag::Tensor<T>& blur, const ag::Tensor<T>& target) {
  return ag::mean(tape, ag::abs(tape, ag::sub(tape, blur, target)));
}

template <std::floating_point T>
ag::Tensor<T> loss_bayes_l1(ag::Tape<T>& tape, const ag::Tensor<T>& blur, const ag::Tensor<T>& log_sigma,
                            const ag::Tensor<T>& target) {
  auto err = ag::abs(tape, ag::sub(tape, blur, target));
  auto weight = ag::exp(tape, ag::scale(tape, log_sigma, T(-1)));
  auto per = ag::add(tape, ag::mul(tape, weight, err), log_sigma);
  return ag::scale(tape, ag::mean(tape, per), T(0.5));
}

template <std::floating_point T>
ag::Tensor<T> loss_bayes_l2(ag::Tape<T>& tape, const ag::Tensor<T>& blur, const ag::Tensor<T>& log_sigma,
                            const ag::Tensor<T>& target) {
  auto e = ag::sub(tape, blur, target);
  auto weight = ag::exp(tape, ag::scale(tape, log_sigma, T(-2)));
  auto per = ag::add(tape, ag::mul(tape, weight, ag::mul(tape, e, e)), ag::scale(tape, log_sigma, T(2)));
  return ag::scale(tape, ag::mean(tape, per), T(0.5));
}

template <std::floating_point T>
ag::Tensor<T> compute_loss(ag::Tape<T>& tape, LossKind kind, const DdnOutput<T>& out, const ag::Tensor<T>& target) {
  switch (kind) {
    case LossKind::L1: return loss_l1(tape, out.blur, target);
    case LossKind::BayesL1: return loss_bayes_l1(tape, out.blur, out.log_sigma, target);
    case LossKind::BayesL2: return loss_bayes_l2(tape, out.blur, out.log_sigma, target);
  }
  throw Error(ErrorKind::Config, "unknown loss");
}

}  // namespace cca
