#include <gtest/gtest.h>

#include <cmath>

#include "cca/error.hpp"
#include "cca/optics.hpp"

using namespace cca;

namespace {

// Textbook thin-lens blur circle radius (px), written independently of the library.
double oracle_blur(double f, double N, double uf, double pitch, double u) {
  const double A = f / N;
  return 0.5 * A * f * (uf - u) / (u * (uf - f)) / pitch;
}

// Direct-sum full convolution of two kernels.
std::vector<double> brute_convolve(const PsfKernel& a, const PsfKernel& b, int& radius) {
  radius = a.radius() + b.radius();
  const int side = 2 * radius + 1;
  std::vector<double> out(static_cast<std::size_t>(side) * side, 0.0);
  for (int ay = -a.radius(); ay <= a.radius(); ++ay)
    for (int ax = -a.radius(); ax <= a.radius(); ++ax)
      for (int by = -b.radius(); by <= b.radius(); ++by)
        for (int bx = -b.radius(); bx <= b.radius(); ++bx)
          out[static_cast<std::size_t>(ay + by + radius) * side + (ax + bx + radius)] += a.at(ax, ay) * b.at(bx, by);
  double s = 0.0;
  for (double v : out) s += v;
  for (double& v : out) v /= s;
  return out;
}

}  // namespace

TEST(Optics, ThinLensAnchorMatchesOracle) {
  const LensConfig lens;
  EXPECT_NEAR(ideal_blur(lens, 1100.0).px, oracle_blur(50, 4, 1500, 0.01, 1100), 1e-9);
  EXPECT_NEAR(ideal_blur(lens, 1100.0).px, 7.84, 0.01);
  EXPECT_NEAR(ideal_blur(lens, 2400.0).px, oracle_blur(50, 4, 1500, 0.01, 2400), 1e-9);
  EXPECT_LT(ideal_blur(lens, 2400.0).px, 0.0);
}

TEST(Optics, InFocusBlurIsZero) {
  const LensConfig lens;
  EXPECT_DOUBLE_EQ(ideal_blur(lens, 1500.0).px, 0.0);
  EXPECT_DOUBLE_EQ(distance_from_blur(lens, SignedBlur{0.0}), 1500.0);
}

TEST(Optics, InverseOfAnchor) {
  const LensConfig lens;
  EXPECT_NEAR(distance_from_blur(lens, SignedBlur{7.84}), 1100.0, 1.0);
}

TEST(Optics, RoundTripOverHundredDistances) {
  const LensConfig lens;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double u = 1100.0 + 1300.0 * i / 99.0;
    worst = std::max(worst, std::abs(distance_from_blur(lens, ideal_blur(lens, u)) - u) / u);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Optics, BlurIsStrictlyDecreasingInDistance) {
  const LensConfig lens;
  double prev = ideal_blur(lens, 60.0).px;
  for (double u = 70.0; u < 1e6; u *= 1.05) {
    const double b = ideal_blur(lens, u).px;
    EXPECT_LT(b, prev) << u;
    prev = b;
  }
}

TEST(Optics, DistanceInsideFocalLengthIsDomainError) {
  const LensConfig lens;
  try {
    ideal_blur(lens, 40.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
}

TEST(Optics, BlurOutsideInvertibleRangeIsRangeError) {
  const LensConfig lens;
  const BlurRange r = invertible_blur_range(lens);
  try {
    distance_from_blur(lens, SignedBlur{r.far_px - 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Range);
  }
  EXPECT_NO_THROW(distance_from_blur(lens, SignedBlur{r.far_px + 0.5}));
}

TEST(Optics, FieldCurvatureAddsToMagnitude) {
  const LensConfig lens;
  AberrationField ab;
  ab.field_curvature = 2.0;
  const SensorPos corner{1.0, 1.0};
  EXPECT_NEAR(radial_position(lens, corner), 1.0, 1e-12);
  EXPECT_NEAR(blur_from_distance(lens, 1100.0, corner, ab).px, ideal_blur(lens, 1100.0).px + 2.0, 1e-12);
  EXPECT_NEAR(blur_from_distance(lens, 2400.0, corner, ab).px, ideal_blur(lens, 2400.0).px - 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(blur_from_distance(lens, 1100.0, {}, ab).px, ideal_blur(lens, 1100.0).px);
}

TEST(Psf, InFocusIsDelta) {
  const LensConfig lens;
  for (Channel c : {Channel::R, Channel::G, Channel::B}) {
    const PsfKernel k = psf(lens, SignedBlur{0.0}, c);
    EXPECT_EQ(k.side(), 1);
    EXPECT_DOUBLE_EQ(k.at(0, 0), 1.0);
  }
}

TEST(Psf, RedHalfVanishesAndBlueIsMirror) {
  const LensConfig lens;
  const PsfKernel r = psf(lens, SignedBlur{4.0}, Channel::R);
  const PsfKernel b = psf(lens, SignedBlur{4.0}, Channel::B);
  for (int dy = -r.radius(); dy <= r.radius(); ++dy)
    for (int dx = -r.radius(); dx < 0; ++dx) EXPECT_EQ(r.at(dx, dy), 0.0);
  const PsfKernel m = r.mirrored();
  ASSERT_EQ(m.radius(), b.radius());
  for (int dy = -b.radius(); dy <= b.radius(); ++dy)
    for (int dx = -b.radius(); dx <= b.radius(); ++dx) EXPECT_NEAR(m.at(dx, dy), b.at(dx, dy), 1e-12);
}

TEST(Psf, GreenIsConvolutionOfRedAndBlue) {
  const LensConfig lens;
  const PsfKernel r = psf(lens, SignedBlur{4.0}, Channel::R);
  const PsfKernel b = psf(lens, SignedBlur{4.0}, Channel::B);
  const PsfKernel g = psf(lens, SignedBlur{4.0}, Channel::G);
  int radius = 0;
  const auto expect = brute_convolve(r, b, radius);
  const int side = 2 * radius + 1;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      EXPECT_NEAR(g.at(dx, dy), expect[static_cast<std::size_t>(dy + radius) * side + dx + radius], 1e-12);
}

TEST(Psf, SignFlipMirrors) {
  const LensConfig lens;
  for (double b : {0.7, 3.0, 8.0}) {
    const PsfKernel pos = psf(lens, SignedBlur{b}, Channel::R);
    const PsfKernel neg = psf(lens, SignedBlur{-b}, Channel::R).mirrored();
    ASSERT_EQ(pos.radius(), neg.radius());
    for (std::size_t i = 0; i < pos.taps().size(); ++i) EXPECT_NEAR(pos.taps()[i], neg.taps()[i], 1e-12);
  }
}

TEST(Psf, NormalizedEverywhere) {
  const LensConfig lens;
  AberrationField ab;
  ab.field_curvature = 1.0;
  ab.coma = 0.5;
  ab.lateral_chromatic = {1.1, 1.0, 0.9};
  const SensorPos positions[] = {{0.0, 0.0}, {0.5, -0.3}, {-1.0, 1.0}};
  for (double b = -12.0; b <= 12.0; b += 0.75)
    for (Channel c : {Channel::R, Channel::G, Channel::B})
      for (const auto& p : positions) {
        EXPECT_NEAR(psf(lens, SignedBlur{b}, c, p).sum(), 1.0, 1e-9);
        EXPECT_NEAR(psf(lens, SignedBlur{b}, c, p, ab).sum(), 1.0, 1e-9);
      }
}

TEST(Psf, IdealLensIsShiftInvariant) {
  const LensConfig lens;
  const PsfKernel a = psf(lens, SignedBlur{-5.0}, Channel::G, {0.0, 0.0});
  const PsfKernel b = psf(lens, SignedBlur{-5.0}, Channel::G, {0.9, -0.7});
  EXPECT_EQ(a.taps(), b.taps());
}

TEST(Psf, AberrationsChangePeripheralKernels) {
  const LensConfig lens;
  AberrationField ab;
  ab.coma = 0.5;
  ab.lateral_chromatic = {1.2, 1.0, 1.0};
  const PsfKernel center = psf(lens, SignedBlur{4.0}, Channel::R, {0.0, 0.0}, ab);
  const PsfKernel ideal = psf(lens, SignedBlur{4.0}, Channel::R);
  EXPECT_EQ(center.taps(), ideal.taps());
  const PsfKernel edge = psf(lens, SignedBlur{4.0}, Channel::R, {1.0, 0.0}, ab);
  EXPECT_NE(edge.taps(), ideal.taps());
}
