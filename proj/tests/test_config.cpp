#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cca/config.hpp"
#include "cca/error.hpp"
#include "cca/rng.hpp"

using namespace cca;

TEST(Config, DefaultsAreRegistered) {
  const Config c;
  EXPECT_EQ(c.get_double("focal_length_mm"), 50.0);
  EXPECT_EQ(c.get_int("channels"), 32);
  EXPECT_EQ(c.get_int("batch"), 128);
  EXPECT_TRUE(c.get_bool("positional_branch"));
}

TEST(Config, UnknownKeyIsRejected) {
  Config c;
  try {
    c.apply_override("focal_lenght_mm=35");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownKey);
  }
}

TEST(Config, TextMergeSkipsCommentsAndTrims) {
  Config c;
  c.merge_text("# lens\n  f_number = 2.8 \n\nseed=7\n");
  EXPECT_EQ(c.get_double("f_number"), 2.8);
  EXPECT_EQ(c.get_u64("seed"), 7u);
}

TEST(Config, TypedGettersValidate) {
  Config c;
  c.set("channels", "eight");
  EXPECT_THROW(c.get_int("channels"), Error);
  c.set("sigma_threshold", "inf");
  EXPECT_TRUE(std::isinf(c.get_double("sigma_threshold")));
  c.set("augment", "maybe");
  EXPECT_THROW(c.get_bool("augment"), Error);
}

TEST(Config, SnapshotRoundTrips) {
  Config a;
  a.set("fc_coeff", "2");
  a.set("texture_color", "gray");
  const auto path = std::filesystem::temp_directory_path() / "cca_config_snapshot.cfg";
  a.write_snapshot(path);
  const Config b = Config::from_file(path);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  std::filesystem::remove(path);
}

TEST(Config, MissingFileIsIoError) {
  try {
    Config::from_file("/nonexistent/cca.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng r(3);
  double s = 0.0, s2 = 0.0, n1 = 0.0, n2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
    const double g = r.normal();
    n1 += g;
    n2 += g * g;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - 0.25, 1.0 / 12.0, 0.005);
  EXPECT_NEAR(n1 / n, 0.0, 0.01);
  EXPECT_NEAR(n2 / n, 1.0, 0.01);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
}
