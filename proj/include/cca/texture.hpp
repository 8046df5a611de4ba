#pragma once

#include <cstdint>
#include <string_view>

#include "cca/image.hpp"
#include "cca/rng.hpp"

namespace cca {

enum class Palette { Mixed, Gray, Saturated };

Palette parse_palette(std::string_view name);

/// Procedural texture: a mosaic of random rectangles, band-limited intensity
/// noise and random strokes. Gray textures have identical channels;
/// saturated textures keep every color at saturation >= 0.85.
RgbImage procedural_texture(int width, int height, Palette palette, Rng& rng);

/// Random horizontal/vertical flips and isotropic rescaling (bilinear,
/// mirrored borders) of a source texture, resampled to width x height.
RgbImage jitter_texture(const RgbImage& src, int width, int height, Rng& rng, bool enabled = true);

/// HSV (all in [0,1]) to RGB.
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace cca
