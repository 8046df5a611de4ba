#include "cca/dfad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cca/config.hpp"
#include "cca/error.hpp"
#include "cca/parallel.hpp"
#include "cca/render.hpp"

namespace cca {

namespace {

constexpr int kWindow = 16;

// Central differences of a side x side plane with replicated borders,
// horizontal then vertical, appended to `out`.
void append_gradients(std::span<const double> plane, int side, std::vector<double>& out) {
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, side - 1);
    y = std::clamp(y, 0, side - 1);
    return plane[static_cast<std::size_t>(y) * side + x];
  };
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) out.push_back(0.5 * (at(x + 1, y) - at(x - 1, y)));
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) out.push_back(0.5 * (at(x, y + 1) - at(x, y - 1)));
}

// Window of one channel plus `margin` pixels of context on every side.
struct Context {
  int margin;
  int side;
  std::vector<double> values;

  Context(const RgbImage& img, int c, int x0, int y0, int margin_px)
      : margin(margin_px), side(kWindow + 2 * margin_px) {
    values.resize(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        values[static_cast<std::size_t>(y) * side + x] = img.clamped(c, x0 - margin + x, y0 - margin + y);
  }

  double at(int x, int y) const {  // window coordinates
    return values[static_cast<std::size_t>(y + margin) * side + (x + margin)];
  }
};

std::vector<double> deform(const Context& ctx, const PsfKernel& k) {
  std::vector<double> out(kWindow * kWindow, 0.0);
  const int r = k.radius();
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double w = k.at(dx, dy);
      if (w == 0.0) continue;
      for (int y = 0; y < kWindow; ++y)
        for (int x = 0; x < kWindow; ++x) out[y * kWindow + x] += w * ctx.at(x - dx, y - dy);
    }
  return out;
}

}  // namespace

GradientStack gradient_stack(const RgbImage& img) {
  GradientStack g;
  g.width = img.width();
  g.height = img.height();
  const int w = g.width;
  const int h = g.height;
  for (int c = 0; c < 3; ++c) {
    auto& gx = g.planes[2 * c];
    auto& gy = g.planes[2 * c + 1];
    gx.resize(static_cast<std::size_t>(w) * h);
    gy.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        gx[static_cast<std::size_t>(y) * w + x] =
            0.5 * (img.at(c, std::min(x + 1, w - 1), y) - img.at(c, std::max(x - 1, 0), y));
        gy[static_cast<std::size_t>(y) * w + x] =
            0.5 * (img.at(c, x, std::min(y + 1, h - 1)) - img.at(c, x, std::max(y - 1, 0)));
      }
  }
  return g;
}

double zncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::Shape, "zncc: length mismatch");
  if (a.size() < 2) throw Error(ErrorKind::Shape, "zncc: need at least two samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

void BlurSearchSpec::validate() const {
  if (!(b_min < b_max)) throw Error(ErrorKind::Config, "blur search requires b_min < b_max");
  if (grid_count < 3) throw Error(ErrorKind::Config, "blur search requires grid_count >= 3");
}

DfadEstimator::DfadEstimator(const LensConfig& lens, const BlurSearchSpec& spec, double grad_threshold)
    : lens_(lens), spec_(spec), grad_threshold_(grad_threshold) {
  spec_.validate();
  bank_.reserve(static_cast<std::size_t>(spec_.grid_count));
  for (int i = 0; i < spec_.grid_count; ++i) bank_.push_back(deformation({spec_.b_min + i * spec_.step()}));
}

DfadEstimator::Deformation DfadEstimator::deformation(SignedBlur b) const {
  return {psf(lens_, b, Channel::R).mirrored(), psf(lens_, b, Channel::B).mirrored()};
}

double DfadEstimator::cost_with(const RgbImage& img, int x0, int y0, const Deformation& d) const {
  const int margin = std::max(d.red.radius(), d.blue.radius());
  const Context red(img, 0, x0, y0, margin);
  const Context blue(img, 2, x0, y0, margin);
  std::vector<double> green(kWindow * kWindow);
  for (int y = 0; y < kWindow; ++y)
    for (int x = 0; x < kWindow; ++x) green[y * kWindow + x] = img.clamped(1, x0 + x, y0 + y);

  std::vector<double> gr, gg, gb;
  append_gradients(deform(red, d.red), kWindow, gr);
  append_gradients(green, kWindow, gg);
  append_gradients(deform(blue, d.blue), kWindow, gb);
  return 3.0 - zncc(gr, gg) - zncc(gg, gb) - zncc(gr, gb);
}

double DfadEstimator::cost(const RgbImage& img, int x0, int y0, SignedBlur b) const {
  return cost_with(img, x0, y0, deformation(b));
}

BlurEstimate DfadEstimator::estimate(const RgbImage& img, int x0, int y0) const {
  if (x0 < 0 || y0 < 0 || x0 + kWindow > img.width() || y0 + kWindow > img.height())
    throw Error(ErrorKind::Size, "window outside image");
  if (mean_gradient_magnitude(img, x0, y0, kWindow) < grad_threshold_)
    throw Error(ErrorKind::NoCue, "window below gradient threshold");

  std::vector<double> costs(bank_.size());
  for (std::size_t i = 0; i < bank_.size(); ++i) costs[i] = cost_with(img, x0, y0, bank_[i]);
  const auto best = static_cast<std::size_t>(std::min_element(costs.begin(), costs.end()) - costs.begin());
  const double h = spec_.step();
  BlurEstimate est{{spec_.b_min + static_cast<double>(best) * h}, costs[best]};

  if (spec_.refine && best > 0 && best + 1 < costs.size()) {
    const double c0 = costs[best - 1], c1 = costs[best], c2 = costs[best + 1];
    const double denom = c0 - 2.0 * c1 + c2;
    if (denom > 0.0) {
      const double offset = 0.5 * (c0 - c2) / denom;
      const SignedBlur b{est.blur.px + offset * h};
      const double c = cost(img, x0, y0, b);
      if (c <= c1) est = {b, c};
    }
  }
  return est;
}

double dfad_cost(const RgbImage& patch, SignedBlur b, const LensConfig& lens) {
  if (patch.width() != kWindow || patch.height() != kWindow)
    throw Error(ErrorKind::Size, "dfad_cost expects a 16x16 patch");
  const DfadEstimator est(lens, BlurSearchSpec{b.px - 1.0, b.px + 1.0, 3, false});
  return est.cost(patch, 0, 0, b);
}

DepthMap dfad_depth_map(const RgbImage& img, const LensConfig& lens, const BlurSearchSpec& spec,
                        int stride, double grad_threshold, int workers) {
  if (stride < 1) throw Error(ErrorKind::Config, "stride must be >= 1");
  if (img.width() < kWindow || img.height() < kWindow)
    throw Error(ErrorKind::Size, "image smaller than one 16x16 window");
  const DfadEstimator est(lens, spec, grad_threshold);
  const int nx = (img.width() - kWindow) / stride + 1;
  const int ny = (img.height() - kWindow) / stride + 1;
  DepthMap map;
  map.stride = stride;
  map.window = kWindow;
  map.distance_mm = Grid<float>(nx, ny, std::numeric_limits<float>::quiet_NaN());
  map.blur_px = Grid<float>(nx, ny, std::numeric_limits<float>::quiet_NaN());
  map.no_cue = Grid<std::uint8_t>(nx, ny, 0);
  const BlurRange range = invertible_blur_range(lens);
  parallel_for(static_cast<std::size_t>(nx) * ny, workers, [&](std::size_t idx) {
    const int ix = static_cast<int>(idx % nx);
    const int iy = static_cast<int>(idx / nx);
    if (mean_gradient_magnitude(img, ix * stride, iy * stride, kWindow) < grad_threshold) {
      map.no_cue.at(ix, iy) = 1;
      return;
    }
    const BlurEstimate e = est.estimate(img, ix * stride, iy * stride);
    map.blur_px.at(ix, iy) = static_cast<float>(e.blur.px);
    if (e.blur.px > range.far_px && e.blur.px < range.near_px)
      map.distance_mm.at(ix, iy) = static_cast<float>(distance_from_blur(lens, e.blur));
  });
  return map;
}

BlurSearchSpec search_spec_from(const Config& cfg) {
  BlurSearchSpec s;
  s.b_min = cfg.get_double("search_min_px");
  s.b_max = cfg.get_double("search_max_px");
  s.grid_count = cfg.get_int("grid_count");
  s.refine = cfg.get_bool("refine");
  s.validate();
  return s;
}

}  // namespace cca
