#include "cca/texture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cca/error.hpp"

namespace cca {

Palette parse_palette(std::string_view name) {
  if (name == "mixed") return Palette::Mixed;
  if (name == "gray") return Palette::Gray;
  if (name == "saturated") return Palette::Saturated;
  throw Error(ErrorKind::Config, "unknown texture palette '" + std::string(name) + "'");
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = 6.0 * (h - std::floor(h));
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

namespace {

using Color = std::array<double, 3>;

enum class Mode { Gray, Mild, Saturated };

Color random_color(Mode mode, Rng& rng) {
  Color c{};
  switch (mode) {
    case Mode::Gray: {
      const double v = rng.uniform(0.05, 0.95);
      c = {v, v, v};
      break;
    }
    case Mode::Mild:
      hsv_to_rgb(rng.uniform(), rng.uniform(0.0, 0.5), rng.uniform(0.1, 0.95), c[0], c[1], c[2]);
      break;
    case Mode::Saturated:
      hsv_to_rgb(rng.uniform(), rng.uniform(0.85, 1.0), rng.uniform(0.4, 1.0), c[0], c[1], c[2]);
      break;
  }
  return c;
}

void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, const Color& c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width());
  y1 = std::min(y1, img.height());
  for (int ch = 0; ch < 3; ++ch)
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) img.at(ch, x, y) = c[ch];
}

void draw_stroke(RgbImage& img, double x0, double y0, double x1, double y1, double half_width,
                 const Color& c) {
  const int bx0 = static_cast<int>(std::floor(std::min(x0, x1) - half_width - 1));
  const int bx1 = static_cast<int>(std::ceil(std::max(x0, x1) + half_width + 1));
  const int by0 = static_cast<int>(std::floor(std::min(y0, y1) - half_width - 1));
  const int by1 = static_cast<int>(std::ceil(std::max(y0, y1) + half_width + 1));
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double len2 = std::max(dx * dx + dy * dy, 1e-12);
  for (int y = std::max(by0, 0); y < std::min(by1, img.height()); ++y)
    for (int x = std::max(bx0, 0); x < std::min(bx1, img.width()); ++x) {
      const double px = x + 0.5 - x0;
      const double py = y + 0.5 - y0;
      const double t = std::clamp((px * dx + py * dy) / len2, 0.0, 1.0);
      const double ex = px - t * dx;
      const double ey = py - t * dy;
      if (ex * ex + ey * ey <= half_width * half_width)
        for (int ch = 0; ch < 3; ++ch) img.at(ch, x, y) = c[ch];
    }
}

}  // namespace

RgbImage procedural_texture(int width, int height, Palette palette, Rng& rng) {
  Mode mode = Mode::Gray;
  switch (palette) {
    case Palette::Gray: mode = Mode::Gray; break;
    case Palette::Saturated: mode = Mode::Saturated; break;
    case Palette::Mixed: {
      const std::size_t pick = rng.index(3);
      mode = pick == 0 ? Mode::Gray : (pick == 1 ? Mode::Mild : Mode::Saturated);
      break;
    }
  }

  RgbImage img(width, height);
  fill_rect(img, 0, 0, width, height, random_color(mode, rng));

  const int area = width * height;
  const int rects = std::max(8, area / 1200);
  for (int i = 0; i < rects; ++i) {
    const int w = rng.integer(3, std::max(4, width / 5));
    const int h = rng.integer(3, std::max(4, height / 5));
    const int x = rng.integer(-w / 2, width - w / 2);
    const int y = rng.integer(-h / 2, height - h / 2);
    fill_rect(img, x, y, x + w, y + h, random_color(mode, rng));
  }

  const int strokes = std::max(4, area / 2500);
  for (int i = 0; i < strokes; ++i) {
    const double x0 = rng.uniform(0.0, width);
    const double y0 = rng.uniform(0.0, height);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double len = rng.uniform(6.0, 40.0);
    draw_stroke(img, x0, y0, x0 + len * std::cos(angle), y0 + len * std::sin(angle),
                rng.uniform(0.6, 2.0), random_color(mode, rng));
  }

  // Multiplicative band-limited noise keeps hue and saturation per pixel.
  constexpr int kWaves = 6;
  std::array<double, kWaves> kx{}, ky{}, phase{}, amp{};
  for (int i = 0; i < kWaves; ++i) {
    const double wavelength = rng.uniform(4.0, 32.0);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    kx[i] = 2.0 * std::numbers::pi * std::cos(angle) / wavelength;
    ky[i] = 2.0 * std::numbers::pi * std::sin(angle) / wavelength;
    phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    amp[i] = rng.uniform(0.02, 0.08);
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double n = 0.0;
      for (int i = 0; i < kWaves; ++i) n += amp[i] * std::sin(kx[i] * x + ky[i] * y + phase[i]);
      const double gain = 1.0 + n;
      for (int ch = 0; ch < 3; ++ch) img.at(ch, x, y) = std::clamp(img.at(ch, x, y) * gain, 0.0, 1.0);
    }
  return img;
}

RgbImage jitter_texture(const RgbImage& src, int width, int height, Rng& rng, bool enabled) {
  bool flip_x = false;
  bool flip_y = false;
  double scale = 1.0;
  double ox = 0.0;
  double oy = 0.0;
  if (enabled) {
    flip_x = rng.bernoulli(0.5);
    flip_y = rng.bernoulli(0.5);
    scale = std::exp(rng.uniform(std::log(0.75), std::log(1.33)));
    ox = rng.uniform(0.0, std::max(0.0, src.width() - width / scale));
    oy = rng.uniform(0.0, std::max(0.0, src.height() - height / scale));
  }
  // mirrored index, period 2n
  auto reflect = [](int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  RgbImage out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int xx = flip_x ? width - 1 - x : x;
      const int yy = flip_y ? height - 1 - y : y;
      const double sx = ox + (xx + 0.5) / scale - 0.5;
      const double sy = oy + (yy + 0.5) / scale - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const int iy = static_cast<int>(std::floor(sy));
      const double fx = sx - ix;
      const double fy = sy - iy;
      const int x0 = reflect(ix, src.width()), x1 = reflect(ix + 1, src.width());
      const int y0 = reflect(iy, src.height()), y1 = reflect(iy + 1, src.height());
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - fx) * src.at(c, x0, y0) + fx * src.at(c, x1, y0);
        const double bot = (1 - fx) * src.at(c, x0, y1) + fx * src.at(c, x1, y1);
        out.at(c, x, y) = (1 - fy) * top + fy * bot;
      }
    }
  return out;
}

}  // namespace cca
