#include <gtest/gtest.h>

#include <bit>
#include <random>

#include "bnn/errors.hpp"
#include "bnn/kernels.hpp"

using namespace bnn;

namespace {

template <class Word>
std::vector<Word> pack_bits(const std::vector<int>& bits) {
  std::vector<Word> words(words_for_bits<Word>(bits.size()), Word{0});
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) words[i / lane_bits_of<Word>] |= static_cast<Word>(Word{1} << (i % lane_bits_of<Word>));
  }
  return words;
}

std::vector<int> random_bits(std::size_t len, std::mt19937_64& rng) {
  std::vector<int> v(len);
  std::bernoulli_distribution coin(0.5);
  for (auto& b : v) b = coin(rng) ? 1 : 0;
  return v;
}

// Elementwise +/-1 multiply-accumulate.
std::int64_t sign_dot(const std::vector<int>& a, const std::vector<int>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] ? 1.0 : -1.0) * (b[i] ? 1.0 : -1.0);
  return static_cast<std::int64_t>(s);
}

// Sum of weights over the plane's support.
std::int64_t support_sum(const std::vector<int>& plane, const std::vector<int>& w) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < plane.size(); ++i) s += plane[i] * (w[i] ? 1 : -1);
  return s;
}

using View8 = PackedVectorView<std::uint8_t>;

}  // namespace

TEST(BinaryDot, IdenticalVectorsGiveLen) {
  const std::uint8_t a = 0b10110010;
  EXPECT_EQ(binary_dot(View8({&a, 1}, 8), View8({&a, 1}, 8)), 8);
}

TEST(BinaryDot, ComplementGivesMinusLen) {
  const std::uint8_t a = 0b10110010, b = 0b01001101;
  EXPECT_EQ(binary_dot(View8({&a, 1}, 8), View8({&b, 1}, 8)), -8);
}

TEST(BinaryDot, WorkedExample) {
  const std::uint8_t a = 0b10110010, b = 0b01110110;
  EXPECT_EQ(binary_dot(View8({&a, 1}, 8), View8({&b, 1}, 8)), 2);
}

TEST(BinaryDot, LengthMismatchThrows) {
  const std::uint8_t a = 0x0F;
  EXPECT_THROW(binary_dot(View8({&a, 1}, 4), View8({&a, 1}, 5)), DimensionError);
}

TEST(PackedVectorView, RejectsBitsPastLength) {
  const std::uint8_t a = 0x1F;
  EXPECT_THROW(View8({&a, 1}, 4), InvalidValueError);
  EXPECT_THROW(View8({&a, 1}, 9), DimensionError);
  const std::uint8_t two[2] = {0x0F, 0x01};
  EXPECT_THROW(View8({two, 2}, 4), InvalidValueError);
}

TEST(PlaneDot, Examples) {
  const std::uint8_t zero = 0, ones = 0xFF, w = 0b01010101, plane = 0b00001111;
  EXPECT_EQ(plane_dot(View8({&zero, 1}, 8), View8({&w, 1}, 8)), 0);
  EXPECT_EQ(plane_dot(View8({&ones, 1}, 8), View8({&ones, 1}, 8)), 8);
  EXPECT_EQ(plane_dot(View8({&plane, 1}, 8), View8({&w, 1}, 8)), 0);
  EXPECT_THROW(plane_dot(View8({&plane, 1}, 8), View8({&w, 1}, 7)), DimensionError);
}

TEST(SpanPopcount, Examples) {
  const std::uint8_t z[1] = {0x00}, f[2] = {0xFF, 0xFF}, m[2] = {0x59, 0xA3};
  EXPECT_EQ(span_popcount<std::uint8_t>(z), 0u);
  EXPECT_EQ(span_popcount<std::uint8_t>(f), 16u);
  EXPECT_EQ(span_popcount<std::uint8_t>(m), 8u);
}

TEST(Popcount, PortableMatchesNative) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t w = rng();
    ASSERT_EQ(popcount_portable<std::uint64_t>(w), static_cast<unsigned>(std::popcount(w)));
    ASSERT_EQ(popcount_portable<std::uint32_t>(static_cast<std::uint32_t>(w)),
              static_cast<unsigned>(std::popcount(static_cast<std::uint32_t>(w))));
    ASSERT_EQ(popcount_portable<std::uint16_t>(static_cast<std::uint16_t>(w)),
              static_cast<unsigned>(std::popcount(static_cast<std::uint16_t>(w))));
    ASSERT_EQ(popcount_portable<std::uint8_t>(static_cast<std::uint8_t>(w)),
              static_cast<unsigned>(std::popcount(static_cast<std::uint8_t>(w))));
  }
}

TEST(BinaryDot, MatchesSignOracleAndProperties) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> len_dist(1, 4096);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t len = len_dist(rng);
    const auto a = random_bits(len, rng), b = random_bits(len, rng);
    std::vector<int> not_a(len);
    for (std::size_t k = 0; k < len; ++k) not_a[k] = 1 - a[k];
    const auto wa = pack_bits<std::uint64_t>(a), wb = pack_bits<std::uint64_t>(b),
               wn = pack_bits<std::uint64_t>(not_a);
    const PackedVectorView<> va(wa, len), vb(wb, len), vn(wn, len);
    const std::int64_t d = binary_dot(va, vb);
    ASSERT_EQ(d, sign_dot(a, b)) << "len " << len;
    ASSERT_EQ((d + static_cast<std::int64_t>(len)) % 2, 0);
    ASSERT_EQ(d, binary_dot(vb, va));
    ASSERT_EQ(binary_dot(va, va), static_cast<std::int64_t>(len));
    ASSERT_EQ(binary_dot(va, vn), -static_cast<std::int64_t>(len));
  }
}

TEST(PlaneDot, MatchesSupportSumOracle) {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<std::size_t> len_dist(1, 1000);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t len = len_dist(rng);
    const auto p = random_bits(len, rng), w = random_bits(len, rng);
    const auto wp = pack_bits<std::uint64_t>(p), ww = pack_bits<std::uint64_t>(w);
    ASSERT_EQ(plane_dot(PackedVectorView<>(wp, len), PackedVectorView<>(ww, len)), support_sum(p, w));
  }
}

template <class Word>
std::pair<std::int64_t, std::int64_t> dots_with(const std::vector<int>& a, const std::vector<int>& b) {
  const auto wa = pack_bits<Word>(a), wb = pack_bits<Word>(b);
  const PackedVectorView<Word> va(wa, a.size()), vb(wb, b.size());
  return {binary_dot(va, vb), plane_dot(va, vb)};
}

TEST(Kernels, LaneWidthIndependence) {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<std::size_t> len_dist(1, 700);
  for (int i = 0; i < 500; ++i) {
    const std::size_t len = len_dist(rng);
    const auto a = random_bits(len, rng), b = random_bits(len, rng);
    const auto r64 = dots_with<std::uint64_t>(a, b);
    ASSERT_EQ(dots_with<std::uint8_t>(a, b), r64);
    ASSERT_EQ(dots_with<std::uint16_t>(a, b), r64);
    ASSERT_EQ(dots_with<std::uint32_t>(a, b), r64);
  }
}
