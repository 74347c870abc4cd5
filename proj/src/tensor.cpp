#include "bnn/tensor.hpp"

#include <cstring>

namespace bnn {

void Shape::validate() const {
  if (n == 0 || h == 0 || w == 0 || c == 0) {
    throw DimensionError("shape " + to_string() + " has a zero extent");
  }
  std::size_t total = 1;
  for (const std::size_t d : {n, h, w, c}) {
    if (__builtin_mul_overflow(total, d, &total)) {
      throw DimensionError("shape " + to_string() + " overflows the addressable size");
    }
  }
}

std::string Shape::to_string() const {
  return "(" + std::to_string(n) + ", " + std::to_string(h) + ", " + std::to_string(w) + ", " +
         std::to_string(c) + ")";
}

BitTensor flatten_channels(const BitTensor& t) {
  const Shape& s = t.shape();
  if (s.h == 1 && s.w == 1) return t;

  const std::size_t len = s.h * s.w * s.c;
  const Shape out_shape{s.n, 1, 1, len};
  const std::size_t out_wpp = words_for_bits<std::uint64_t>(len);
  std::vector<std::uint64_t> out(s.n * out_wpp, 0);
  const auto in = t.words();
  const std::size_t in_wpp = t.words_per_pixel();

  for (std::size_t n = 0; n < s.n; ++n) {
    std::uint64_t* dst = out.data() + n * out_wpp;
    std::size_t pos = 0;
    for (std::size_t p = 0; p < s.h * s.w; ++p) {
      const std::uint64_t* src = in.data() + (n * s.h * s.w + p) * in_wpp;
      if (pos % 64 == 0 && s.c % 64 == 0) {
        std::memcpy(dst + pos / 64, src, in_wpp * sizeof(std::uint64_t));
        pos += s.c;
        continue;
      }
      std::size_t remaining = s.c;
      for (std::size_t k = 0; k < in_wpp; ++k) {
        const std::size_t take = remaining < 64 ? remaining : 64;
        const std::uint64_t chunk = src[k];
        const std::size_t off = pos % 64;
        dst[pos / 64] |= chunk << off;
        if (off != 0 && off + take > 64) dst[pos / 64 + 1] |= chunk >> (64 - off);
        pos += take;
        remaining -= take;
      }
    }
  }
  return BitTensor(out_shape, std::move(out));
}

}  // namespace bnn
