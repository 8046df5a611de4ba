#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace cca {

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Planar RGB image, values nominally in [0,1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height), data_(3 * static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  double& at(int c, int x, int y) { return data_[index(c, x, y)]; }
  double at(int c, int x, int y) const { return data_[index(c, x, y)]; }

  /// Border-replicating read.
  double clamped(int c, int x, int y) const {
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    return data_[index(c, x, y)];
  }

  std::span<double> plane(int c) {
    return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * width_ * height_,
                                            static_cast<std::size_t>(width_) * height_);
  }
  std::span<const double> plane(int c) const {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * width_ * height_,
                                                  static_cast<std::size_t>(width_) * height_);
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  RgbImage crop(int x0, int y0, int w, int h) const;
  void clamp01();

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t index(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Binary PPM (P6), 8- or 16-bit on read; written as 8-bit.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

/// 16-bit binary PGM (P5, big-endian samples).
void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& img);
Grid<std::uint16_t> read_pgm16(const std::filesystem::path& path);

/// Float raster: "CCAZ", u32 width, u32 height, row-major little-endian float32.
void write_float_raster(const std::filesystem::path& path, const Grid<float>& grid);
Grid<float> read_float_raster(const std::filesystem::path& path);

/// Little-endian scalar I/O shared by the binary formats.
namespace le {
void put_u32(std::vector<std::byte>& out, std::uint32_t v);
void put_f32(std::vector<std::byte>& out, float v);
std::uint32_t get_u32(std::span<const std::byte> in, std::size_t& pos);
float get_f32(std::span<const std::byte> in, std::size_t& pos);
}  // namespace le

std::vector<std::byte> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace cca
