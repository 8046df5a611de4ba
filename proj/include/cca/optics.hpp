#pragma once

#include <array>
#include <vector>

namespace cca {

class Config;

/// Thin lens, circular aperture and sensor geometry.
struct LensConfig {
  double focal_length_mm = 50.0;
  double f_number = 4.0;
  double focus_distance_mm = 1500.0;
  double pixel_pitch_mm = 0.01;
  int sensor_width = 256;
  int sensor_height = 256;
  /// Gaussian sigma (px) per pixel of blur radius.
  double sigma_per_px = 0.5;

  double aperture_diameter_mm() const { return focal_length_mm / f_number; }
  /// Image distance for an object at u (mm).
  double image_distance_mm(double u_mm) const;
  /// Throws ErrorKind::Domain when the configuration cannot form a real image.
  void validate() const;

  friend bool operator==(const LensConfig&, const LensConfig&) = default;
};

/// Three-knob shift-variant aberration model. The defaults are the ideal lens.
struct AberrationField {
  /// Blur magnitude offset (px) at normalized radius 1; scales with r^2.
  double field_curvature = 0.0;
  /// Parabolic shear of the kernel along the radial direction, scales with r.
  double coma = 0.0;
  /// Per-channel kernel scale at normalized radius 1 (R, G, B).
  std::array<double, 3> lateral_chromatic{1.0, 1.0, 1.0};

  bool is_ideal() const {
    return field_curvature == 0.0 && coma == 0.0 && lateral_chromatic == std::array{1.0, 1.0, 1.0};
  }

  friend bool operator==(const AberrationField&, const AberrationField&) = default;
};

/// Normalized sensor position, each axis in [-1, 1] with the optical axis at 0.
struct SensorPos {
  double x = 0.0;
  double y = 0.0;
};

/// Defocus blur radius in pixels; positive when the object is nearer than focus.
struct SignedBlur {
  double px = 0.0;

  friend auto operator<=>(const SignedBlur&, const SignedBlur&) = default;
};

enum class Channel { R = 0, G = 1, B = 2 };

/// Odd-sided square kernel, taps stored row-major with the center at (radius, radius).
class PsfKernel {
 public:
  PsfKernel() : PsfKernel(Channel::G, 0) {}
  PsfKernel(Channel channel, int radius);

  static PsfKernel delta(Channel channel) { return PsfKernel(channel, 0); }

  Channel channel() const { return channel_; }
  int radius() const { return radius_; }
  int side() const { return 2 * radius_ + 1; }

  /// Tap at offset (dx, dy) from the center; zero outside the support.
  double at(int dx, int dy) const;
  double& tap(int dx, int dy) { return taps_[index(dx, dy)]; }

  const std::vector<double>& taps() const { return taps_; }
  double sum() const;
  void normalize();

  /// Reflection about the vertical axis: out(dx, dy) = in(-dx, dy).
  PsfKernel mirrored() const;

 private:
  std::size_t index(int dx, int dy) const {
    return static_cast<std::size_t>(dy + radius_) * side() + (dx + radius_);
  }

  Channel channel_;
  int radius_;
  std::vector<double> taps_;
};

/// Normalized radial distance from the optical axis, 1 at the sensor corners.
double radial_position(const LensConfig& lens, SensorPos pos);

/// Blur from the ideal thin lens only.
SignedBlur ideal_blur(const LensConfig& lens, double u_mm);

/// Signed blur of an object at u, including field curvature at `pos`.
SignedBlur blur_from_distance(const LensConfig& lens, double u_mm, SensorPos pos = {},
                              const AberrationField& ab = {});

/// Exact inverse of ideal_blur. Throws ErrorKind::Range when no finite
/// distance beyond the focal length produces `b`.
double distance_from_blur(const LensConfig& lens, SignedBlur b);

/// Open interval of invertible signed blur (far limit is the blur at infinity).
struct BlurRange {
  double far_px;   // negative
  double near_px;  // positive
};
BlurRange invertible_blur_range(const LensConfig& lens);

/// Per-channel color-coded-aperture PSF at a signed blur.
PsfKernel psf(const LensConfig& lens, SignedBlur b, Channel channel, SensorPos pos = {},
              const AberrationField& ab = {});

/// Full discrete convolution of two kernels (side 2r1 + 2r2 + 1).
PsfKernel convolve(const PsfKernel& a, const PsfKernel& b, Channel channel);

LensConfig lens_from_config(const Config& cfg);
AberrationField aberration_from_config(const Config& cfg);

}  // namespace cca
