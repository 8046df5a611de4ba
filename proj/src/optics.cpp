#include "cca/optics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cca/config.hpp"
#include "cca/error.hpp"

namespace cca {

double LensConfig::image_distance_mm(double u_mm) const {
  return 1.0 / (1.0 / focal_length_mm - 1.0 / u_mm);
}

void LensConfig::validate() const {
  if (!(focal_length_mm > 0.0)) throw Error(ErrorKind::Domain, "focal_length_mm must be > 0");
  if (!(f_number > 0.0)) throw Error(ErrorKind::Domain, "f_number must be > 0");
  if (!(focus_distance_mm > focal_length_mm))
    throw Error(ErrorKind::Domain, "focus_distance_mm must exceed focal_length_mm");
  if (!(pixel_pitch_mm > 0.0)) throw Error(ErrorKind::Domain, "pixel_pitch_mm must be > 0");
  if (sensor_width < 1 || sensor_height < 1) throw Error(ErrorKind::Domain, "sensor size must be >= 1");
  if (!(sigma_per_px > 0.0)) throw Error(ErrorKind::Domain, "sigma_per_px must be > 0");
}

PsfKernel::PsfKernel(Channel channel, int radius)
    : channel_(channel), radius_(radius), taps_(static_cast<std::size_t>(side()) * side(), 0.0) {
  if (radius == 0) taps_[0] = 1.0;
}

double PsfKernel::at(int dx, int dy) const {
  if (std::abs(dx) > radius_ || std::abs(dy) > radius_) return 0.0;
  return taps_[index(dx, dy)];
}

double PsfKernel::sum() const { return std::accumulate(taps_.begin(), taps_.end(), 0.0); }

void PsfKernel::normalize() {
  const double s = sum();
  if (!(s > 0.0)) throw Error(ErrorKind::Domain, "PSF has no energy");
  for (double& t : taps_) t /= s;
}

PsfKernel PsfKernel::mirrored() const {
  PsfKernel out(channel_, radius_);
  for (int dy = -radius_; dy <= radius_; ++dy)
    for (int dx = -radius_; dx <= radius_; ++dx) out.tap(dx, dy) = at(-dx, dy);
  return out;
}

double radial_position(const LensConfig& lens, SensorPos pos) {
  const double hx = 0.5 * lens.sensor_width;
  const double hy = 0.5 * lens.sensor_height;
  return std::hypot(pos.x * hx, pos.y * hy) / std::hypot(hx, hy);
}

SignedBlur ideal_blur(const LensConfig& lens, double u_mm) {
  if (!(u_mm > lens.focal_length_mm))
    throw Error(ErrorKind::Domain,
                "object distance " + std::to_string(u_mm) + " mm is not beyond the focal length");
  const double v = lens.image_distance_mm(u_mm);
  const double vf = lens.image_distance_mm(lens.focus_distance_mm);
  const double radius_mm = 0.5 * lens.aperture_diameter_mm() * std::abs(v - vf) / v;
  const double px = radius_mm / lens.pixel_pitch_mm;
  return {u_mm < lens.focus_distance_mm ? px : -px};
}

SignedBlur blur_from_distance(const LensConfig& lens, double u_mm, SensorPos pos,
                              const AberrationField& ab) {
  const SignedBlur ideal = ideal_blur(lens, u_mm);
  if (ab.field_curvature == 0.0) return ideal;
  const double r = radial_position(lens, pos);
  const double magnitude = std::max(0.0, std::abs(ideal.px) + ab.field_curvature * r * r);
  return {u_mm < lens.focus_distance_mm ? magnitude : -magnitude};
}

BlurRange invertible_blur_range(const LensConfig& lens) {
  const double half_aperture = 0.5 * lens.aperture_diameter_mm();
  const double vf = lens.image_distance_mm(lens.focus_distance_mm);
  return {-half_aperture * (vf / lens.focal_length_mm - 1.0) / lens.pixel_pitch_mm,
          half_aperture / lens.pixel_pitch_mm};
}

double distance_from_blur(const LensConfig& lens, SignedBlur b) {
  const BlurRange range = invertible_blur_range(lens);
  if (!(b.px > range.far_px && b.px < range.near_px))
    throw Error(ErrorKind::Range, "blur " + std::to_string(b.px) + " px is outside the invertible range");
  if (b.px == 0.0) return lens.focus_distance_mm;
  const double ratio = 2.0 * std::abs(b.px) * lens.pixel_pitch_mm / lens.aperture_diameter_mm();
  const double vf = lens.image_distance_mm(lens.focus_distance_mm);
  // near: |v - vf| / v = ratio with v > vf; far: with v < vf
  const double v = b.px > 0.0 ? vf / (1.0 - ratio) : vf / (1.0 + ratio);
  return 1.0 / (1.0 / lens.focal_length_mm - 1.0 / v);
}

namespace {

struct TapTransform {
  double scale = 1.0;  // lateral chromatic stretch
  double shear = 0.0;  // coma strength (c_cm * r)
  double ex = 1.0;     // radial unit vector
  double ey = 0.0;
};

// Half-Gaussian restricted to side*x' >= 0 in transformed coordinates.
PsfKernel half_gaussian(Channel channel, double sigma, int side, const TapTransform& t) {
  const double extent = t.scale * (3.0 * sigma + 9.0 * std::abs(t.shear) * sigma);
  const int radius = static_cast<int>(std::ceil(extent));
  PsfKernel k(channel, radius);
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      double x = dx / t.scale;
      double y = dy / t.scale;
      if (t.shear != 0.0) {
        const double p = x * t.ex + y * t.ey;
        const double q = -x * t.ey + y * t.ex;
        const double ps = p - t.shear * q * q / sigma;
        x = ps * t.ex - q * t.ey;
        y = ps * t.ey + q * t.ex;
      }
      const bool inside = side > 0 ? x >= 0.0 : x <= 0.0;
      k.tap(dx, dy) = inside ? std::exp(-(x * x + y * y) * inv_two_var) : 0.0;
    }
  }
  k.normalize();
  return k;
}

}  // namespace

PsfKernel convolve(const PsfKernel& a, const PsfKernel& b, Channel channel) {
  const int ra = a.radius();
  const int rb = b.radius();
  PsfKernel out(channel, ra + rb);
  out.tap(0, 0) = 0.0;
  for (int ay = -ra; ay <= ra; ++ay)
    for (int ax = -ra; ax <= ra; ++ax) {
      const double wa = a.at(ax, ay);
      if (wa == 0.0) continue;
      for (int by = -rb; by <= rb; ++by)
        for (int bx = -rb; bx <= rb; ++bx) out.tap(ax + bx, ay + by) += wa * b.at(bx, by);
    }
  return out;
}

PsfKernel psf(const LensConfig& lens, SignedBlur b, Channel channel, SensorPos pos,
              const AberrationField& ab) {
  const double sigma = lens.sigma_per_px * std::abs(b.px);
  if (sigma == 0.0) return PsfKernel::delta(channel);

  const double r = radial_position(lens, pos);
  TapTransform t;
  t.scale = 1.0 + (ab.lateral_chromatic[static_cast<int>(channel)] - 1.0) * r;
  t.shear = ab.coma * r;
  if (r > 0.0) {
    const double hx = pos.x * lens.sensor_width;
    const double hy = pos.y * lens.sensor_height;
    const double n = std::hypot(hx, hy);
    t.ex = hx / n;
    t.ey = hy / n;
  }
  if (!(t.scale > 0.0)) throw Error(ErrorKind::Domain, "lateral chromatic scale must stay positive");

  // R sees the aperture half selected by the blur sign, B the opposite half.
  const int r_side = b.px > 0.0 ? +1 : -1;
  switch (channel) {
    case Channel::R: return half_gaussian(channel, sigma, r_side, t);
    case Channel::B: return half_gaussian(channel, sigma, -r_side, t);
    case Channel::G: {
      PsfKernel g = convolve(half_gaussian(channel, sigma, +1, t), half_gaussian(channel, sigma, -1, t),
                             channel);
      g.normalize();
      return g;
    }
  }
  return PsfKernel::delta(channel);
}

LensConfig lens_from_config(const Config& cfg) {
  LensConfig lens;
  lens.focal_length_mm = cfg.get_double("focal_length_mm");
  lens.f_number = cfg.get_double("f_number");
  lens.focus_distance_mm = cfg.get_double("focus_distance_mm");
  lens.pixel_pitch_mm = cfg.get_double("pixel_pitch_mm");
  lens.sensor_width = cfg.get_int("sensor_width");
  lens.sensor_height = cfg.get_int("sensor_height");
  lens.sigma_per_px = cfg.get_double("sigma_per_px");
  lens.validate();
  return lens;
}

AberrationField aberration_from_config(const Config& cfg) {
  AberrationField ab;
  ab.field_curvature = cfg.get_double("fc_coeff");
  ab.coma = cfg.get_double("coma_coeff");
  ab.lateral_chromatic = {cfg.get_double("chroma_r"), cfg.get_double("chroma_g"),
                          cfg.get_double("chroma_b")};
  return ab;
}

}  // namespace cca
