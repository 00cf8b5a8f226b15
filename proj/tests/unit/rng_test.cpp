#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mflang/rng.hpp"

using mflang::philox4x32;
using mflang::RngStream;

// Known-answer vectors from the Random123 distribution (kat_vectors).
TEST(Philox, KnownAnswerZero) {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RngStream, SameSeedAndStreamRepeat) {
  RngStream a(42, mflang::stream_id(3, 1, 7)), b(42, mflang::stream_id(3, 1, 7));
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_normal(), b.next_normal());
}

TEST(RngStream, StreamIdsDoNotCollide) {
  EXPECT_NE(mflang::stream_id(0, 0, 1), mflang::stream_id(0, 1, 0));
  EXPECT_NE(mflang::stream_id(1, 0, 0), mflang::stream_id(0, 0, 1));
  EXPECT_NE(mflang::stream_id(1, 0, 0), mflang::stream_id(0, 1, 0));
}

TEST(RngStream, UniformOpenInterval) {
  RngStream r(1, 2);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.next_uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RngStream, NormalMoments) {
  RngStream r(9, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.next_normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(RngStream, DistinctStreamsUncorrelated) {
  RngStream a(5, mflang::stream_id(0, 0, 0)), b(5, mflang::stream_id(0, 0, 1));
  const int n = 100000;
  double c = 0.0;
  for (int i = 0; i < n; ++i) c += a.next_normal() * b.next_normal();
  EXPECT_NEAR(c / n, 0.0, 5.0 / std::sqrt(n));
}

TEST(RngStream, FillMatchesSequentialDraws) {
  RngStream a(11, 4), b(11, 4);
  std::vector<double> buf(7);
  a.fill_normal(buf);
  for (double x : buf) EXPECT_EQ(x, b.next_normal());
}
