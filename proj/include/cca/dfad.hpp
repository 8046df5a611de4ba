#pragma once

#include <array>
#include <span>
#include <vector>

#include "cca/image.hpp"
#include "cca/optics.hpp"

namespace cca {

class Config;

/// Horizontal and vertical same-size central differences per channel,
/// replicated borders. Plane order: Rx, Ry, Gx, Gy, Bx, By.
struct GradientStack {
  int width = 0;
  int height = 0;
  std::array<std::vector<double>, 6> planes;
};

GradientStack gradient_stack(const RgbImage& img);

/// Zero-mean normalized cross correlation; 0 when either input is constant.
double zncc(std::span<const double> a, std::span<const double> b);

struct BlurSearchSpec {
  double b_min = -12.0;
  double b_max = 12.0;
  int grid_count = 65;
  bool refine = true;

  double step() const { return (b_max - b_min) / (grid_count - 1); }
  void validate() const;
};

struct BlurEstimate {
  SignedBlur blur;
  double cost = 0.0;
};

/// Depth from analytical defocus. Deformation kernels come from the ideal-lens
/// PSF generator, so on an ideal-lens render the cost vanishes at the true blur.
class DfadEstimator {
 public:
  DfadEstimator(const LensConfig& lens, const BlurSearchSpec& spec, double grad_threshold = 0.02);

  const BlurSearchSpec& spec() const { return spec_; }

  /// 3 - D(R', G) - D(G, B') - D(R', B') over the 16x16 window at (x0, y0).
  /// Deformation reads surrounding image context (replicated at image borders).
  double cost(const RgbImage& img, int x0, int y0, SignedBlur b) const;

  /// Grid search plus optional parabolic refinement. Throws ErrorKind::NoCue
  /// when the window's mean gradient magnitude is below the threshold.
  BlurEstimate estimate(const RgbImage& img, int x0, int y0) const;

 private:
  struct Deformation {
    PsfKernel red;   // mirror of PSF_R(b)
    PsfKernel blue;  // mirror of PSF_B(b)
  };
  Deformation deformation(SignedBlur b) const;
  double cost_with(const RgbImage& img, int x0, int y0, const Deformation& d) const;

  LensConfig lens_;
  BlurSearchSpec spec_;
  double grad_threshold_;
  std::vector<Deformation> bank_;
};

/// Standalone patch: the whole image is the window context.
double dfad_cost(const RgbImage& patch, SignedBlur b, const LensConfig& lens);

struct DepthMap {
  int stride = 8;
  int window = 16;
  /// Distance in mm per window; NaN where masked.
  Grid<float> distance_mm;
  Grid<float> blur_px;
  /// 1 where the window carries no depth cue.
  Grid<std::uint8_t> no_cue;
};

/// Window-grid depth map; windows under the gradient threshold are masked.
DepthMap dfad_depth_map(const RgbImage& img, const LensConfig& lens, const BlurSearchSpec& spec,
                        int stride, double grad_threshold, int workers = 1);

BlurSearchSpec search_spec_from(const Config& cfg);

}  // namespace cca
