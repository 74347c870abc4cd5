#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "bnn/errors.hpp"
#include "bnn/tensor.hpp"

namespace bnn {

/// Table-driven popcount that never touches a hardware instruction. Kept as
/// a cross-check for std::popcount, which lowers to POPCNT when available.
template <LaneWord Word>
constexpr unsigned popcount_portable(Word w) noexcept {
  constexpr unsigned char kNibble[16] = {0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4};
  unsigned count = 0;
  for (std::size_t i = 0; i < lane_bits_of<Word>; i += 4) {
    count += kNibble[(w >> i) & Word{0xF}];
  }
  return count;
}

template <LaneWord Word>
std::uint64_t span_popcount(std::span<const Word> words) noexcept {
  std::uint64_t total = 0;
  for (const Word w : words) total += static_cast<std::uint64_t>(std::popcount(w));
  return total;
}

namespace detail {

// Unchecked inner loops. Four words per step so a 64-bit lane covers
// 256 channels per iteration.

template <LaneWord Word>
inline std::uint32_t xor_popcount(const Word* a, const Word* b, std::size_t n) noexcept {
  std::uint32_t c0 = 0, c1 = 0, c2 = 0, c3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    c0 += std::popcount(static_cast<Word>(a[i] ^ b[i]));
    c1 += std::popcount(static_cast<Word>(a[i + 1] ^ b[i + 1]));
    c2 += std::popcount(static_cast<Word>(a[i + 2] ^ b[i + 2]));
    c3 += std::popcount(static_cast<Word>(a[i + 3] ^ b[i + 3]));
  }
  for (; i < n; ++i) c0 += std::popcount(static_cast<Word>(a[i] ^ b[i]));
  return c0 + c1 + c2 + c3;
}

template <LaneWord Word>
inline std::uint32_t and_popcount(const Word* a, const Word* b, std::size_t n) noexcept {
  std::uint32_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += std::popcount(static_cast<Word>(a[i] & b[i]));
  return c;
}

template <LaneWord Word>
inline std::uint32_t popcount(const Word* a, std::size_t n) noexcept {
  std::uint32_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += std::popcount(a[i]);
  return c;
}

}  // namespace detail

/// A packed bit vector of `len` valid bits. Every bit past `len` is zero.
template <LaneWord Word = std::uint64_t>
class PackedVectorView {
 public:
  static constexpr std::size_t lane_bits = lane_bits_of<Word>;

  PackedVectorView(std::span<const Word> words, std::size_t len) : words_(words), len_(len) {
    if (len > words.size() * lane_bits) {
      throw DimensionError("packed vector of " + std::to_string(words.size()) +
                           " words cannot hold " + std::to_string(len) + " bits");
    }
    const std::size_t used = words_for_bits<Word>(len);
    if (used > 0 && (words[used - 1] & static_cast<Word>(~tail_mask<Word>(len))) != 0) {
      throw InvalidValueError("packed vector has set bits past its length");
    }
    for (std::size_t i = used; i < words.size(); ++i) {
      if (words[i] != 0) throw InvalidValueError("packed vector has set bits past its length");
    }
  }

  std::span<const Word> words() const noexcept { return words_; }
  std::size_t len() const noexcept { return len_; }
  std::size_t used_words() const noexcept { return words_for_bits<Word>(len_); }

 private:
  std::span<const Word> words_;
  std::size_t len_;
};

/// +/-1 dot product of two sign-encoded vectors: Len - 2 * popcount(a ^ b).
template <LaneWord Word>
std::int64_t binary_dot(const PackedVectorView<Word>& a, const PackedVectorView<Word>& b) {
  if (a.len() != b.len()) {
    throw DimensionError("binary_dot: lengths " + std::to_string(a.len()) + " and " +
                         std::to_string(b.len()) + " differ");
  }
  const auto mismatches =
      detail::xor_popcount(a.words().data(), b.words().data(), a.used_words());
  return static_cast<std::int64_t>(a.len()) - 2 * static_cast<std::int64_t>(mismatches);
}

/// Sum of the +/-1 weights selected by the raw {0,1} bits of `plane`:
/// 2 * popcount(plane & w) - popcount(plane).
template <LaneWord Word>
std::int64_t plane_dot(const PackedVectorView<Word>& plane, const PackedVectorView<Word>& w) {
  if (plane.len() != w.len()) {
    throw DimensionError("plane_dot: lengths " + std::to_string(plane.len()) + " and " +
                         std::to_string(w.len()) + " differ");
  }
  const std::size_t n = plane.used_words();
  const auto both = detail::and_popcount(plane.words().data(), w.words().data(), n);
  const auto ones = detail::popcount(plane.words().data(), n);
  return 2 * static_cast<std::int64_t>(both) - static_cast<std::int64_t>(ones);
}

}  // namespace bnn
