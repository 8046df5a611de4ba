#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "cca/error.hpp"
#include "cca/image.hpp"
#include "cca/rng.hpp"

using namespace cca;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("cca_test_" + name); }

}  // namespace

TEST(Image, PpmRoundTripIsExactOnEightBitValues) {
  RgbImage img(7, 5);
  Rng rng(1);
  for (double& v : img.values()) v = static_cast<double>(rng.index(256)) / 255.0;
  const auto path = temp_file("rt.ppm");
  write_ppm(path, img);
  const RgbImage back = read_ppm(path);
  ASSERT_EQ(back.width(), 7);
  ASSERT_EQ(back.height(), 5);
  for (std::size_t i = 0; i < img.values().size(); ++i) EXPECT_NEAR(back.values()[i], img.values()[i], 1e-12);
  fs::remove(path);
}

TEST(Image, ReadingMissingPpmIsIoError) {
  try {
    read_ppm("/nonexistent/x.ppm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Image, Pgm16RoundTrip) {
  Grid<std::uint16_t> g(4, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) g.at(x, y) = static_cast<std::uint16_t>(x * 20000 + y * 7);
  const auto path = temp_file("rt.pgm");
  write_pgm16(path, g);
  const auto back = read_pgm16(path);
  ASSERT_EQ(back.width(), 4);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(back.at(x, y), g.at(x, y));
  fs::remove(path);
}

TEST(Image, FloatRasterKeepsNaNMask) {
  Grid<float> g(3, 2, 1500.5f);
  g.at(1, 1) = std::numeric_limits<float>::quiet_NaN();
  const auto path = temp_file("rt.ccaz");
  write_float_raster(path, g);
  const auto bytes = read_bytes(path);
  ASSERT_EQ(bytes.size(), 12u + 6u * 4u);
  EXPECT_EQ(static_cast<char>(bytes[0]), 'C');
  EXPECT_EQ(static_cast<char>(bytes[3]), 'Z');
  const auto back = read_float_raster(path);
  EXPECT_EQ(back.at(0, 0), 1500.5f);
  EXPECT_TRUE(std::isnan(back.at(1, 1)));
  fs::remove(path);
}

TEST(Image, CropOutsideIsSizeError) {
  const RgbImage img(8, 8);
  EXPECT_NO_THROW(img.crop(2, 2, 6, 6));
  EXPECT_THROW(img.crop(4, 4, 6, 6), Error);
}
