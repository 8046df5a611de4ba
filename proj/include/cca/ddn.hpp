#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cca/autograd/checkpoint.hpp"
#include "cca/autograd/ops.hpp"
#include "cca/autograd/tensor.hpp"
#include "cca/optics.hpp"
#include "cca/render.hpp"
#include "cca/rng.hpp"

namespace cca {

class Config;

enum class InputMode { Gradients, Raw };
enum class LossKind { L1, BayesL1, BayesL2 };
/// Log: the head predicts log|sigma|, clamped. Raw: the head predicts sigma itself.
enum class SigmaParam { Log, Raw };

struct DdnConfig {
  int patch_side = 16;
  int channels = 32;
  int resblocks = 5;
  bool positional = true;
  bool color = true;
  InputMode input = InputMode::Gradients;
  LossKind loss = LossKind::BayesL1;
  SigmaParam sigma_param = SigmaParam::Log;
  double log_sigma_min = -6.0;
  double log_sigma_max = 6.0;
  /// Fixed factor on the gradient input planes (gradient mode only).
  double input_gain = 10.0;
  /// Fixed factor on the blur head output (px).
  double blur_scale = 8.0;

  int input_planes() const { return input == InputMode::Gradients ? 6 : 3; }
  void validate() const;
  friend bool operator==(const DdnConfig&, const DdnConfig&) = default;
};

DdnConfig ddn_config_from(const Config& cfg);
std::string to_string(LossKind k);
std::string to_string(InputMode m);
std::string to_string(SigmaParam p);

// ---------------------------------------------------------------------------
// Input construction

/// Network inputs for one 16x16 patch, each plane row-major 16x16.
struct Preprocessed {
  std::vector<double> grad_stack;  // 6 planes: Rx, Ry, Gx, Gy, Bx, By
  std::vector<double> pos_maps;    // 2 planes: x, y broadcast
  std::vector<double> color_maps;  // 2 planes: hue in [0,1), saturation in [0,1]
};

/// `patch` holds 3 planes of side x side values in [0,1].
Preprocessed preprocess(std::span<const float> patch, int side, SensorPos pos);

/// Hexagonal hue in [0,1) (0 for achromatic) and saturation (max-min)/max.
void hue_saturation(double r, double g, double b, double& hue, double& sat);

/// Writes one sample's inputs into batch slot buffers (main has 6 or 3 planes).
template <typename T>
void fill_inputs(std::span<const float> patch16, SensorPos pos, InputMode mode, T* main, T* pos_out,
                 T* color_out);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentOptions {
  double brightness_min = 0.8;
  double brightness_max = 1.25;
  double erase_prob = 0.3;
  int erase_min = 2;
  int erase_max = 6;
};

/// One random draw; applying it is deterministic.
struct AugmentDraw {
  int crop_x = 0;
  int crop_y = 0;
  double brightness = 1.0;
  bool erase = false;
  int erase_x = 0;
  int erase_y = 0;
  int erase_w = 0;
  int erase_h = 0;
  float erase_value = 0.0f;
};

AugmentDraw draw_augment(Rng& rng, int stored_side, const AugmentOptions& opts);
/// Center crop, no brightness change, no erasing.
AugmentDraw identity_augment(int stored_side);
/// Returns a 16x16x3 patch.
std::vector<float> apply_augment(const PatchSample& s, const AugmentDraw& d);
std::vector<float> augment(const PatchSample& s, Rng& rng, const AugmentOptions& opts);
std::vector<float> center_crop(const PatchSample& s);

// ---------------------------------------------------------------------------
// Network

template <std::floating_point T>
struct DdnBatch {
  ag::Tensor<T> main;   // [N, 6 or 3, 16, 16]
  ag::Tensor<T> pos;    // [N, 2, 16, 16]
  ag::Tensor<T> color;  // [N, 2, 16, 16]
  ag::Tensor<T> target; // [N, 1] signed blur
};

/// Builds a batch from already cropped 16x16 patches.
template <std::floating_point T>
DdnBatch<T> make_batch(const std::vector<std::vector<float>>& patches, const std::vector<SensorPos>& positions,
                       const std::vector<double>& targets, InputMode mode);

template <std::floating_point T>
struct DdnOutput {
  ag::Tensor<T> blur;       // [N,1]
  ag::Tensor<T> log_sigma;  // [N,1]; clamped head (log) or log|raw head| (raw)
  ag::Tensor<T> raw_sigma;  // [N,1]; head output before any transform
  ag::Tensor<T> attention_pos;    // undefined when the branch is off
  ag::Tensor<T> attention_color;  // undefined when the branch is off
};

template <std::floating_point T>
struct ConvLayer {
  ag::Tensor<T> w;
  ag::Tensor<T> b;
};

template <std::floating_point T>
struct ResBlock {
  ConvLayer<T> first;
  ConvLayer<T> second;
};

/// Three-branch deaberration network: gradient main branch gated by sigmoid
/// attention from a positional and a color branch, ResBlock trunk, conv,
/// 2x2 max pooling, ReLU, global average pooling, and two dense heads.
template <std::floating_point T>
class DdnModel {
 public:
  DdnModel() = default;
  DdnModel(const DdnConfig& cfg, std::uint64_t seed);

  const DdnConfig& config() const { return cfg_; }

  DdnOutput<T> forward(ag::Tape<T>& tape, const DdnBatch<T>& batch) const;

  /// Every trainable tensor, in a fixed order matching names().
  std::vector<ag::Tensor<T>> parameters() const;
  std::vector<std::string> names() const;

  std::vector<ag::NamedTensor> export_tensors() const;
  void import_tensors(const std::vector<ag::NamedTensor>& tensors);

  /// Deep copy with identical values.
  DdnModel clone() const;
  template <std::floating_point U>
  DdnModel<U> cast() const;

  ConvLayer<T>& pos_head() { return pos_head_; }
  ConvLayer<T>& color_head() { return color_head_; }

 private:
  template <std::floating_point U>
  friend class DdnModel;

  std::vector<std::pair<std::string, ag::Tensor<T>*>> registry();
  std::vector<std::pair<std::string, const ag::Tensor<T>*>> registry() const;

  ag::Tensor<T> run_branch(ag::Tape<T>& tape, const ConvLayer<T>& stem, const std::vector<ResBlock<T>>& blocks,
                           const ConvLayer<T>& head, const ag::Tensor<T>& input) const;

  DdnConfig cfg_;
  ConvLayer<T> main_stem_;
  ConvLayer<T> pos_stem_, color_stem_;
  std::vector<ResBlock<T>> pos_blocks_, color_blocks_, trunk_blocks_;
  ConvLayer<T> pos_head_, color_head_;
  ConvLayer<T> post_;
  ConvLayer<T> blur_head_, sigma_head_;  // dense: w [1, C], b [1]
};

// ---------------------------------------------------------------------------
// Losses (scalar tensors). `target` is a constant [N,1] tensor.

template <std::floating_point T>
ag::Tensor<T> loss_l1(ag::Tape<T>& tape, const ag::Tensor<T>& blur, const ag::Tensor<T>& target);

/// (1/2N) sum exp(-s)|b' - b| + s with s = log|sigma|.
template <std::floating_point T>
ag::Tensor<T> loss_bayes_l1(ag::Tape<T>& tape, const ag::Tensor<T>& blur, const ag::Tensor<T>& log_sigma,
                            const ag::Tensor<T>& target);

/// (1/2N) sum exp(-2s)(b' - b)^2 + 2s.
template <std::floating_point T>
ag::Tensor<T> loss_bayes_l2(ag::Tape<T>& tape, const ag::Tensor<T>& blur, const ag::Tensor<T>& log_sigma,
                            const ag::Tensor<T>& target);

template <std::floating_point T>
ag::Tensor<T> compute_loss(ag::Tape<T>& tape, LossKind kind, const DdnOutput<T>& out, const ag::Tensor<T>& target);

struct Prediction {
  SignedBlur blur;
  /// |sigma|, the reliability (smaller is more reliable).
  double sigma = 1.0;
};

/// Inference without recording, in batches.
std::vector<Prediction> predict(const DdnModel<float>& model, const std::vector<std::vector<float>>& patches,
                                const std::vector<SensorPos>& positions, int batch = 256);
std::vector<Prediction> predict_samples(const DdnModel<float>& model, const std::vector<PatchSample>& samples,
                                        int batch = 256);

/// Checkpoint plus a "<path>.cfg" sidecar with architecture and lens keys and
/// a "<path>.txt" layer summary.
void save_model(const std::filesystem::path& path, const DdnModel<float>& model, const LensConfig& lens);
struct LoadedModel {
  DdnModel<float> model;
  LensConfig lens;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace cca

#include "cca/ddn_impl.hpp"
