#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cca/image.hpp"
#include "cca/optics.hpp"

namespace cca {

struct RenderOptions {
  int block_size = 32;
  double noise_sigma = 0.002;
  std::uint64_t noise_seed = 0;
};

/// Normalized sensor position of a point given in pixel coordinates
/// (continuous; pixel centers sit at +0.5).
SensorPos sensor_position(double x, double y, int width, int height);

/// Signed blur to apply to the block whose center is at `pos`.
using BlurField = std::function<SignedBlur(SensorPos)>;

/// Block-wise shift-variant convolution: every block is convolved with the
/// per-channel PSF at its center, borders replicate. Noise then clamp.
RgbImage render_blur_field(const RgbImage& texture, const BlurField& blur, const LensConfig& lens,
                           const AberrationField& ab, const RenderOptions& opts);

/// Fronto-parallel scene at distance u.
RgbImage render_flat(const RgbImage& texture, double u_mm, const LensConfig& lens,
                     const AberrationField& ab, const RenderOptions& opts = {});

/// Scene whose depth (mm) is sampled at each block center.
RgbImage render_depth_field(const RgbImage& texture, const std::function<double(SensorPos)>& depth_mm,
                            const LensConfig& lens, const AberrationField& ab,
                            const RenderOptions& opts = {});

/// Same-size central differences with replicated window borders, gradient
/// magnitude averaged over pixels and channels of the window.
double mean_gradient_magnitude(const RgbImage& img, int x0, int y0, int side);

/// One training/test example. Patch planes are channel-major, row-major, side x side.
struct PatchSample {
  int side = 16;
  std::vector<float> patch;
  SensorPos pos;
  double gt_distance_mm = 0.0;
  /// Ideal-lens blur of gt_distance: the label a deaberrating estimator must recover.
  SignedBlur gt_blur;

  float value(int c, int x, int y) const {
    return patch[(static_cast<std::size_t>(c) * side + y) * side + x];
  }
};

struct PatchWindow {
  int x0 = 0;
  int y0 = 0;
  int side = 16;
};

struct Extraction {
  std::vector<PatchSample> samples;
  std::vector<PatchWindow> windows;
  /// Fewer than the requested number of qualifying windows existed.
  bool shortfall = false;
};

/// Uniformly random, pairwise non-overlapping windows of `side` whose
/// central 16x16 region has mean gradient magnitude >= tau_g.
Extraction extract_patches(const RgbImage& img, double u_mm, const LensConfig& lens, double tau_g,
                           std::size_t n, std::uint64_t seed, int side = 16);

/// Stored sample as an image (side x side).
RgbImage sample_to_image(const PatchSample& s);

}  // namespace cca
