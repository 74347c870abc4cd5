#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "bnn/errors.hpp"

namespace bnn {

/// NHWC extents. All four dimensions must be strictly positive.
struct Shape {
  std::size_t n = 1;
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t c = 1;

  /// Throws DimensionError on a zero extent or when n*h*w*c overflows size_t.
  void validate() const;

  std::size_t pixels() const noexcept { return n * h * w; }
  std::size_t count() const noexcept { return n * h * w * c; }

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Unpacked NHWC tensor. Element (n, h, w, c) lives at ((n*H + h)*W + w)*C + c.
template <class T>
class DenseTensor {
 public:
  using value_type = T;

  DenseTensor() = default;

  explicit DenseTensor(Shape shape) : shape_(shape) {
    shape_.validate();
    data_.assign(shape_.count(), T{});
  }

  DenseTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    shape_.validate();
    if (data_.size() != shape_.count()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_.to_string());
    }
    if constexpr (std::is_floating_point_v<T>) {
      for (const T v : data_) {
        if (!std::isfinite(v)) throw InvalidValueError("tensor contains a non-finite value");
      }
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::span<const T> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return ((n * shape_.h + h) * shape_.w + w) * shape_.c + c;
  }

  const T& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return data_[index(n, h, w, c)];
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using ByteTensor = DenseTensor<std::uint8_t>;
/// Values restricted to -1 / +1 wherever a sign tensor is consumed.
using SignTensor = DenseTensor<std::int8_t>;
using FloatTensor = DenseTensor<float>;
using DoubleTensor = DenseTensor<double>;

template <class W>
concept LaneWord = std::same_as<W, std::uint8_t> || std::same_as<W, std::uint16_t> ||
                   std::same_as<W, std::uint32_t> || std::same_as<W, std::uint64_t>;

template <LaneWord Word>
constexpr std::size_t lane_bits_of = std::numeric_limits<Word>::digits;

template <LaneWord Word>
constexpr std::size_t words_for_bits(std::size_t bits) noexcept {
  return (bits + lane_bits_of<Word> - 1) / lane_bits_of<Word>;
}

/// Mask of the valid bits in the last word of a `bits`-long packed vector.
template <LaneWord Word>
constexpr Word tail_mask(std::size_t bits) noexcept {
  const std::size_t rem = bits % lane_bits_of<Word>;
  return rem == 0 ? static_cast<Word>(~Word{0}) : static_cast<Word>((Word{1} << rem) - 1);
}

/// NHWC tensor with the channel axis packed into machine words.
///
/// Bit k of word j in a pixel holds channel j*lane_bits + k (LSB first).
/// Bits past the last channel are always zero, so xor/popcount over a whole
/// pixel never picks up padding. For sign data a set bit encodes +1 and a
/// clear bit -1; bit-plane tensors use the same container for raw {0,1}.
template <LaneWord Word = std::uint64_t>
class PackedTensor {
 public:
  using word_type = Word;
  static constexpr std::size_t lane_bits = lane_bits_of<Word>;

  PackedTensor() = default;

  /// All bits clear.
  explicit PackedTensor(Shape shape) : shape_(shape) {
    shape_.validate();
    words_per_pixel_ = words_for_bits<Word>(shape_.c);
    words_.assign(shape_.pixels() * words_per_pixel_, Word{0});
  }

  /// Adopts `words`; throws DimensionError on a length mismatch and
  /// InvalidValueError if any padding bit is set.
  PackedTensor(Shape shape, std::vector<Word> words) : shape_(shape), words_(std::move(words)) {
    shape_.validate();
    words_per_pixel_ = words_for_bits<Word>(shape_.c);
    if (words_.size() != shape_.pixels() * words_per_pixel_) {
      throw DimensionError("packed tensor holds " + std::to_string(words_.size()) +
                           " words, shape " + shape_.to_string() + " needs " +
                           std::to_string(shape_.pixels() * words_per_pixel_));
    }
    const Word pad = static_cast<Word>(~tail_mask<Word>(shape_.c));
    if (pad != 0) {
      for (std::size_t p = 0; p < shape_.pixels(); ++p) {
        if (words_[(p + 1) * words_per_pixel_ - 1] & pad) {
          throw InvalidValueError("packed tensor has a set padding bit in pixel " +
                                  std::to_string(p));
        }
      }
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t words_per_pixel() const noexcept { return words_per_pixel_; }
  std::span<const Word> words() const noexcept { return words_; }

  std::size_t word_index(std::size_t n, std::size_t h, std::size_t w, std::size_t k) const noexcept {
    return ((n * shape_.h + h) * shape_.w + w) * words_per_pixel_ + k;
  }

  std::span<const Word> pixel(std::size_t n, std::size_t h, std::size_t w) const noexcept {
    return std::span<const Word>(words_).subspan(word_index(n, h, w, 0), words_per_pixel_);
  }

  bool bit(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const noexcept {
    const Word word = words_[word_index(n, h, w, c / lane_bits)];
    return (word >> (c % lane_bits)) & Word{1};
  }

  friend bool operator==(const PackedTensor&, const PackedTensor&) = default;

 private:
  Shape shape_{};
  std::size_t words_per_pixel_ = 0;
  std::vector<Word> words_;
};

using BitTensor = PackedTensor<std::uint64_t>;

/// Packs a +/-1 tensor along channels. Throws InvalidValueError on any other value.
template <LaneWord Word = std::uint64_t>
PackedTensor<Word> pack_channels(const SignTensor& src) {
  const Shape& s = src.shape();
  const std::size_t wpp = words_for_bits<Word>(s.c);
  std::vector<Word> words(s.pixels() * wpp, Word{0});
  const auto data = src.data();
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::int8_t v = data[p * s.c + c];
      if (v == 1) {
        words[p * wpp + c / lane_bits_of<Word>] |=
            static_cast<Word>(Word{1} << (c % lane_bits_of<Word>));
      } else if (v != -1) {
        throw InvalidValueError("pack_channels: value " + std::to_string(int{v}) +
                                " at flat index " + std::to_string(p * s.c + c) + " is not +/-1");
      }
    }
  }
  return PackedTensor<Word>(s, std::move(words));
}

template <LaneWord Word>
SignTensor unpack_channels(const PackedTensor<Word>& t) {
  const Shape& s = t.shape();
  const std::size_t wpp = t.words_per_pixel();
  const auto words = t.words();
  std::vector<std::int8_t> out(s.count());
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const Word word = words[p * wpp + c / lane_bits_of<Word>];
      out[p * s.c + c] = ((word >> (c % lane_bits_of<Word>)) & Word{1}) ? 1 : -1;
    }
  }
  return SignTensor(s, std::move(out));
}

/// Splits an 8-bit image into its bit-planes. Element i of the result holds
/// bit i of every byte (LSB first) as a raw {0,1} packed tensor, so that
/// sum_i 2^i * plane_i reconstructs the image.
template <LaneWord Word = std::uint64_t>
std::array<PackedTensor<Word>, 8> split_bitplanes(const ByteTensor& img) {
  const Shape& s = img.shape();
  const std::size_t wpp = words_for_bits<Word>(s.c);
  std::array<std::vector<Word>, 8> planes;
  for (auto& p : planes) p.assign(s.pixels() * wpp, Word{0});
  const auto data = img.data();
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const unsigned byte = data[p * s.c + c];
      const std::size_t wi = p * wpp + c / lane_bits_of<Word>;
      const auto shift = c % lane_bits_of<Word>;
      for (unsigned b = 0; b < 8; ++b) {
        planes[b][wi] |= static_cast<Word>(static_cast<Word>((byte >> b) & 1u) << shift);
      }
    }
  }
  return [&]<std::size_t... I>(std::index_sequence<I...>) {
    return std::array<PackedTensor<Word>, 8>{PackedTensor<Word>(s, std::move(planes[I]))...};
  }(std::make_index_sequence<8>{});
}

/// Reinterprets (n, h, w, c) as (n, 1, 1, h*w*c), repacking the channel bits
/// of consecutive pixels into one contiguous bit vector per batch entry.
BitTensor flatten_channels(const BitTensor& t);

}  // namespace bnn
