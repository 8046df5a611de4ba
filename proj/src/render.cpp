#include "cca/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cca/error.hpp"
#include "cca/rng.hpp"

namespace cca {

namespace {

constexpr int kCueSide = 16;

struct SparseTap {
  int dx;
  int dy;
  double w;
};

std::vector<SparseTap> sparse_taps(const PsfKernel& k) {
  std::vector<SparseTap> taps;
  const int r = k.radius();
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (const double w = k.at(dx, dy); w != 0.0) taps.push_back({dx, dy, w});
  return taps;
}

}  // namespace

SensorPos sensor_position(double x, double y, int width, int height) {
  return {(x - 0.5 * width) / (0.5 * width), (y - 0.5 * height) / (0.5 * height)};
}

RgbImage render_blur_field(const RgbImage& texture, const BlurField& blur, const LensConfig& lens,
                           const AberrationField& ab, const RenderOptions& opts) {
  const int w = texture.width();
  const int h = texture.height();
  const int bs = opts.block_size;
  if (bs < 1) throw Error(ErrorKind::Config, "block_size must be >= 1");

  struct Block {
    int x0, y0, x1, y1;
    std::array<std::vector<SparseTap>, 3> taps;
  };
  std::vector<Block> blocks;
  int max_radius = 0;
  for (int by = 0; by < h; by += bs)
    for (int bx = 0; bx < w; bx += bs) {
      Block b{bx, by, std::min(bx + bs, w), std::min(by + bs, h), {}};
      const SensorPos pos = sensor_position(0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1), w, h);
      const SignedBlur sb = blur(pos);
      for (int c = 0; c < 3; ++c) {
        const PsfKernel k = psf(lens, sb, static_cast<Channel>(c), pos, ab);
        max_radius = std::max(max_radius, k.radius());
        b.taps[c] = sparse_taps(k);
      }
      blocks.push_back(std::move(b));
    }
  if (2 * max_radius + 1 > std::min(w, h))
    throw Error(ErrorKind::Size, "texture is smaller than the PSF support");

  // Replicate-padded copy so the inner loop needs no bounds checks.
  const int pad = max_radius;
  const int pw = w + 2 * pad;
  const int ph = h + 2 * pad;
  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  RgbImage out(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        padded[static_cast<std::size_t>(y) * pw + x] = texture.clamped(c, x - pad, y - pad);
    for (const Block& b : blocks)
      for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) {
          double acc = 0.0;
          for (const SparseTap& t : b.taps[c])
            acc += t.w * padded[static_cast<std::size_t>(y - t.dy + pad) * pw + (x - t.dx + pad)];
          out.at(c, x, y) = acc;
        }
  }

  if (opts.noise_sigma > 0.0) {
    Rng rng(opts.noise_seed);
    for (double& v : out.values()) v += opts.noise_sigma * rng.normal();
  }
  out.clamp01();
  return out;
}

RgbImage render_flat(const RgbImage& texture, double u_mm, const LensConfig& lens,
                     const AberrationField& ab, const RenderOptions& opts) {
  return render_blur_field(
      texture, [&](SensorPos pos) { return blur_from_distance(lens, u_mm, pos, ab); }, lens, ab, opts);
}

RgbImage render_depth_field(const RgbImage& texture, const std::function<double(SensorPos)>& depth_mm,
                            const LensConfig& lens, const AberrationField& ab,
                            const RenderOptions& opts) {
  return render_blur_field(
      texture, [&](SensorPos pos) { return blur_from_distance(lens, depth_mm(pos), pos, ab); }, lens,
      ab, opts);
}

double mean_gradient_magnitude(const RgbImage& img, int x0, int y0, int side) {
  double total = 0.0;
  auto px = [&](int c, int x, int y) {
    x = std::clamp(x, 0, side - 1);
    y = std::clamp(y, 0, side - 1);
    return img.at(c, x0 + x, y0 + y);
  };
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double gx = 0.5 * (px(c, x + 1, y) - px(c, x - 1, y));
        const double gy = 0.5 * (px(c, x, y + 1) - px(c, x, y - 1));
        total += std::sqrt(gx * gx + gy * gy);
      }
  return total / (3.0 * side * side);
}

Extraction extract_patches(const RgbImage& img, double u_mm, const LensConfig& lens, double tau_g,
                           std::size_t n, std::uint64_t seed, int side) {
  Extraction ex;
  if (n == 0) return ex;
  if (side < kCueSide) throw Error(ErrorKind::Size, "patch side must be >= 16");
  const int w = img.width();
  const int h = img.height();
  if (w < side || h < side) {
    ex.shortfall = true;
    return ex;
  }
  std::vector<std::uint32_t> candidates(static_cast<std::size_t>(w - side + 1) * (h - side + 1));
  std::iota(candidates.begin(), candidates.end(), 0u);
  Rng rng(seed);
  rng.shuffle(candidates.begin(), candidates.end());

  Grid<std::uint8_t> taken(w, h, 0);
  const int margin = (side - kCueSide) / 2;
  const SignedBlur gt = ideal_blur(lens, u_mm);
  for (std::uint32_t cand : candidates) {
    const int x0 = static_cast<int>(cand % static_cast<std::uint32_t>(w - side + 1));
    const int y0 = static_cast<int>(cand / static_cast<std::uint32_t>(w - side + 1));
    // corners suffice: all windows share one side length
    if (taken.at(x0, y0) || taken.at(x0 + side - 1, y0) || taken.at(x0, y0 + side - 1) ||
        taken.at(x0 + side - 1, y0 + side - 1))
      continue;
    if (mean_gradient_magnitude(img, x0 + margin, y0 + margin, kCueSide) < tau_g) continue;
    for (int y = y0; y < y0 + side; ++y)
      for (int x = x0; x < x0 + side; ++x) taken.at(x, y) = 1;

    PatchSample s;
    s.side = side;
    s.patch.resize(3 * static_cast<std::size_t>(side) * side);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          s.patch[(static_cast<std::size_t>(c) * side + y) * side + x] =
              static_cast<float>(img.at(c, x0 + x, y0 + y));
    s.pos = sensor_position(x0 + 0.5 * side, y0 + 0.5 * side, w, h);
    s.gt_distance_mm = u_mm;
    s.gt_blur = gt;
    ex.samples.push_back(std::move(s));
    ex.windows.push_back({x0, y0, side});
    if (ex.samples.size() == n) return ex;
  }
  ex.shortfall = true;
  return ex;
}

RgbImage sample_to_image(const PatchSample& s) {
  RgbImage img(s.side, s.side);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s.side; ++y)
      for (int x = 0; x < s.side; ++x) img.at(c, x, y) = s.value(c, x, y);
  return img;
}

}  // namespace cca
