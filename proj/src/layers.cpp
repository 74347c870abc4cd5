#include "bnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bnn/kernels.hpp"

namespace bnn {
namespace {

using Word = std::uint64_t;

// One contiguous run of in-bounds window cells: a kernel row clipped to the
// input's width. Offsets are in words.
struct RowSpan {
  std::size_t in_off;
  std::size_t wt_off;
  std::size_t words;
};

struct Window {
  std::vector<RowSpan> spans;
  std::size_t cells = 0;
};

void window_at(const ConvGeometry& g, const Shape& in, std::size_t wpp, std::size_t oy,
               std::size_t ox, Window& win) {
  win.spans.clear();
  win.cells = 0;
  const auto H = static_cast<std::ptrdiff_t>(in.h);
  const auto W = static_cast<std::ptrdiff_t>(in.w);
  const auto kw = static_cast<std::ptrdiff_t>(g.kernel_w);
  const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * g.stride_w) -
                             static_cast<std::ptrdiff_t>(g.pad_w);
  const std::ptrdiff_t kx_lo = std::max<std::ptrdiff_t>(0, -ix0);
  const std::ptrdiff_t kx_hi = std::min<std::ptrdiff_t>(kw, W - ix0);
  if (kx_lo >= kx_hi) return;
  const auto cols = static_cast<std::size_t>(kx_hi - kx_lo);
  for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride_h + ky) -
                              static_cast<std::ptrdiff_t>(g.pad_h);
    if (iy < 0 || iy >= H) continue;
    win.spans.push_back(RowSpan{
        static_cast<std::size_t>(iy * W + ix0 + kx_lo) * wpp,
        (ky * g.kernel_w + static_cast<std::size_t>(kx_lo)) * wpp,
        cols * wpp,
    });
    win.cells += cols;
  }
}

struct PixelIndex {
  std::size_t n, y, x;
};

PixelIndex decompose(std::size_t p, const Shape& out) {
  const std::size_t x = p % out.w;
  const std::size_t rest = p / out.w;
  return {rest / out.h, rest % out.h, x};
}

void check_weights(const ConvGeometry& g, const BitTensor& weights) {
  if (weights.shape() != g.weight_shape()) {
    throw DimensionError("weights have shape " + weights.shape().to_string() + ", geometry needs " +
                         g.weight_shape().to_string());
  }
}

void check_binarize_params(const ConvGeometry& g, const BitTensor& weights,
                           const std::vector<double>& xi,
                           const std::vector<std::uint8_t>& gamma_positive,
                           const std::vector<float>& bias) {
  g.validate();
  check_weights(g, weights);
  if (xi.size() != g.out_channels || gamma_positive.size() != g.out_channels) {
    throw DimensionError("threshold arrays do not match out_channels " +
                         std::to_string(g.out_channels));
  }
  for (const double t : xi) {
    if (!std::isfinite(t)) throw InvalidParameterError("non-finite threshold");
  }
  if (!bias.empty() && bias.size() != g.out_channels) {
    throw DimensionError("bias length does not match out_channels");
  }
}

// Packs one pixel's 0/1 channel bytes into words.
void pack_pixel(const std::uint8_t* bits, std::size_t channels, Word* out) {
  for (std::size_t c = 0; c < channels; ++c) {
    out[c / 64] |= static_cast<Word>(bits[c]) << (c % 64);
  }
}

BitTensor binarize_accumulators(const AccumTensor& acc, const std::vector<double>& xi,
                                const std::vector<std::uint8_t>& gamma_positive,
                                const Executor& exec) {
  const Shape& s = acc.shape();
  const std::size_t wpp = words_for_bits<Word>(s.c);
  std::vector<Word> out(s.pixels() * wpp, 0);
  const auto data = acc.data();
  exec.parallel_for(s.pixels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Word* dst = out.data() + p * wpp;
      for (std::size_t c = 0; c < s.c; ++c) {
        const bool bit = threshold_bit(data[p * s.c + c], xi[c], gamma_positive[c] != 0);
        dst[c / 64] |= static_cast<Word>(bit) << (c % 64);
      }
    }
  });
  return BitTensor(s, std::move(out));
}

double apply_affine(std::int32_t x1, std::size_t c, const std::vector<float>& bias,
                    const std::optional<BatchNormParams>& bn) {
  const double x2 = static_cast<double>(x1) + (bias.empty() ? 0.0 : static_cast<double>(bias[c]));
  if (!bn) return x2;
  return static_cast<double>(bn->gamma[c]) * (x2 - static_cast<double>(bn->mean[c])) /
             static_cast<double>(bn->sigma[c]) +
         static_cast<double>(bn->beta[c]);
}

FloatTensor finish_output(const AccumTensor& acc, const OutputConvLayer& layer,
                          const Executor& exec) {
  const Shape& s = acc.shape();
  std::vector<float> out(s.count());
  const auto data = acc.data();
  exec.parallel_for(s.pixels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      for (std::size_t c = 0; c < s.c; ++c) {
        out[p * s.c + c] = static_cast<float>(apply_affine(data[p * s.c + c], c, layer.bias, layer.bn));
      }
    }
  });
  return FloatTensor(s, std::move(out));
}

}  // namespace

void ConvGeometry::validate() const {
  if (kernel_h == 0 || kernel_w == 0) throw InvalidParameterError("conv kernel extent must be >= 1");
  if (stride_h == 0 || stride_w == 0) throw InvalidParameterError("conv stride must be >= 1");
  if (in_channels == 0 || out_channels == 0) {
    throw InvalidParameterError("conv channel counts must be >= 1");
  }
}

std::size_t ConvGeometry::out_h(std::size_t in_h) const {
  if (in_h + 2 * pad_h < kernel_h) {
    throw DimensionError("kernel height " + std::to_string(kernel_h) + " exceeds padded input " +
                         std::to_string(in_h + 2 * pad_h));
  }
  return (in_h + 2 * pad_h - kernel_h) / stride_h + 1;
}

std::size_t ConvGeometry::out_w(std::size_t in_w) const {
  if (in_w + 2 * pad_w < kernel_w) {
    throw DimensionError("kernel width " + std::to_string(kernel_w) + " exceeds padded input " +
                         std::to_string(in_w + 2 * pad_w));
  }
  return (in_w + 2 * pad_w - kernel_w) / stride_w + 1;
}

Shape ConvGeometry::output_shape(const Shape& in) const {
  validate();
  if (in.c != in_channels) {
    throw DimensionError("input has " + std::to_string(in.c) + " channels, layer expects " +
                         std::to_string(in_channels));
  }
  return {in.n, out_h(in.h), out_w(in.w), out_channels};
}

void PoolGeometry::validate() const {
  if (window_h == 0 || window_w == 0) throw InvalidParameterError("pool window must be >= 1");
  if (stride_h == 0 || stride_w == 0) throw InvalidParameterError("pool stride must be >= 1");
}

Shape PoolGeometry::output_shape(const Shape& in) const {
  validate();
  return {in.n, (in.h + stride_h - 1) / stride_h, (in.w + stride_w - 1) / stride_w, in.c};
}

void BatchNormParams::validate(std::size_t n) const {
  if (gamma.size() != n || beta.size() != n || mean.size() != n || sigma.size() != n) {
    throw DimensionError("batch-norm arrays must all have " + std::to_string(n) + " entries");
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (!std::isfinite(gamma[c]) || !std::isfinite(beta[c]) || !std::isfinite(mean[c]) ||
        !std::isfinite(sigma[c])) {
      throw InvalidParameterError("batch-norm channel " + std::to_string(c) +
                                  " has a non-finite parameter");
    }
    if (!(sigma[c] > 0.0f)) {
      throw InvalidParameterError("batch-norm channel " + std::to_string(c) +
                                  " has sigma <= 0; fold the variance epsilon before export");
    }
  }
}

BatchNormParams BatchNormParams::identity(std::size_t n) {
  return {std::vector<float>(n, 1.0f), std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f),
          std::vector<float>(n, 1.0f)};
}

ChannelThresholds compute_thresholds(std::span<const float> bias, const BatchNormParams& bn) {
  const std::size_t n = bn.channels();
  if (!bias.empty() && bias.size() != n) {
    throw DimensionError("bias has " + std::to_string(bias.size()) + " entries, batch norm has " +
                         std::to_string(n));
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (bn.gamma.size() == n && bn.gamma[c] == 0.0f) {
      throw PrunableChannelError("channel " + std::to_string(c) +
                                 " has gamma == 0; a zero-gamma channel must be pruned before export");
    }
  }
  bn.validate(n);

  ChannelThresholds t;
  t.xi.resize(n);
  t.gamma_positive.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double b = bias.empty() ? 0.0 : static_cast<double>(bias[c]);
    if (!std::isfinite(b)) throw InvalidParameterError("non-finite bias");
    const double gamma = bn.gamma[c];
    t.xi[c] = static_cast<double>(bn.mean[c]) -
              static_cast<double>(bn.beta[c]) * static_cast<double>(bn.sigma[c]) / gamma - b;
    t.gamma_positive[c] = gamma > 0.0 ? 1 : 0;
  }
  return t;
}

void FusedConvLayer::validate() const {
  check_binarize_params(geometry, weights, xi, gamma_positive, bias);
}

void FirstConvLayer::validate() const {
  check_binarize_params(geometry, weights, xi, gamma_positive, bias);
}

void OutputConvLayer::validate() const {
  geometry.validate();
  check_weights(geometry, weights);
  if (!bias.empty() && bias.size() != geometry.out_channels) {
    throw DimensionError("bias length does not match out_channels");
  }
  for (const float b : bias) {
    if (!std::isfinite(b)) throw InvalidParameterError("non-finite bias");
  }
  if (bn) bn->validate(geometry.out_channels);
  if (flatten_input && (geometry.kernel_h != 1 || geometry.kernel_w != 1 || geometry.stride_h != 1 ||
                        geometry.stride_w != 1 || geometry.pad_h != 0 || geometry.pad_w != 0)) {
    throw InvalidParameterError("a flattening output layer must use a 1x1 geometry");
  }
}

ConvPlan schedule_conv(const ConvGeometry& geometry, std::size_t channel_limit) {
  return ConvPlan{geometry.in_channels <= channel_limit, 8};
}

AccumTensor binary_conv_accumulate(const BitTensor& input, const BitTensor& weights,
                                   const ConvGeometry& g, const Executor& exec) {
  check_weights(g, weights);
  const Shape out_shape = g.output_shape(input.shape());
  const Shape& in = input.shape();
  const std::size_t wpp = input.words_per_pixel();
  const std::size_t filter_words = g.kernel_h * g.kernel_w * wpp;
  const std::size_t image_words = in.h * in.w * wpp;
  const Word* in_words = input.words().data();
  const Word* wt_words = weights.words().data();
  std::vector<std::int32_t> acc(out_shape.count());

  exec.parallel_for(out_shape.pixels(), [&](std::size_t begin, std::size_t end) {
    Window win;
    win.spans.reserve(g.kernel_h);
    for (std::size_t p = begin; p < end; ++p) {
      const auto [n, oy, ox] = decompose(p, out_shape);
      window_at(g, in, wpp, oy, ox, win);
      const Word* base = in_words + n * image_words;
      const auto len = static_cast<std::int32_t>(win.cells * g.in_channels);
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        const Word* filter = wt_words + oc * filter_words;
        std::uint32_t mismatches = 0;
        for (const RowSpan& s : win.spans) {
          mismatches += detail::xor_popcount(base + s.in_off, filter + s.wt_off, s.words);
        }
        acc[p * g.out_channels + oc] = len - 2 * static_cast<std::int32_t>(mismatches);
      }
    }
  });
  return AccumTensor(out_shape, std::move(acc));
}

AccumTensor bitplane_conv_accumulate(const ByteTensor& image, const BitTensor& weights,
                                     const ConvGeometry& g, const Executor& exec) {
  check_weights(g, weights);
  const Shape out_shape = g.output_shape(image.shape());
  const Shape& in = image.shape();
  const auto planes = split_bitplanes<Word>(image);
  const std::size_t wpp = planes[0].words_per_pixel();
  const std::size_t filter_words = g.kernel_h * g.kernel_w * wpp;
  const std::size_t image_words = in.h * in.w * wpp;
  const Word* wt_words = weights.words().data();
  std::vector<std::int32_t> acc(out_shape.count());

  exec.parallel_for(out_shape.pixels(), [&](std::size_t begin, std::size_t end) {
    Window win;
    win.spans.reserve(g.kernel_h);
    for (std::size_t p = begin; p < end; ++p) {
      const auto [n, oy, ox] = decompose(p, out_shape);
      window_at(g, in, wpp, oy, ox, win);
      std::int32_t plane_ones[8] = {};
      for (unsigned b = 0; b < 8; ++b) {
        const Word* base = planes[b].words().data() + n * image_words;
        for (const RowSpan& s : win.spans) {
          plane_ones[b] += static_cast<std::int32_t>(detail::popcount(base + s.in_off, s.words));
        }
      }
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        const Word* filter = wt_words + oc * filter_words;
        std::int32_t s_total = 0;
        for (unsigned b = 0; b < 8; ++b) {
          const Word* base = planes[b].words().data() + n * image_words;
          std::int32_t both = 0;
          for (const RowSpan& s : win.spans) {
            both += static_cast<std::int32_t>(
                detail::and_popcount(base + s.in_off, filter + s.wt_off, s.words));
          }
          s_total += (2 * both - plane_ones[b]) * (1 << b);
        }
        acc[p * g.out_channels + oc] = s_total;
      }
    }
  });
  return AccumTensor(out_shape, std::move(acc));
}

BitTensor fused_binary_conv(const BitTensor& input, const FusedConvLayer& layer,
                            const Executor& exec) {
  return fused_binary_conv(input, layer, ConvPlan{layer.pack_integrated, 8}, exec);
}

BitTensor fused_binary_conv(const BitTensor& input, const FusedConvLayer& layer,
                            const ConvPlan& plan, const Executor& exec) {
  layer.validate();
  const ConvGeometry& g = layer.geometry;
  const Shape out_shape = g.output_shape(input.shape());
  const Shape& in = input.shape();
  const std::size_t wpp = input.words_per_pixel();
  const std::size_t out_wpp = words_for_bits<Word>(g.out_channels);
  const std::size_t filter_words = g.kernel_h * g.kernel_w * wpp;
  const std::size_t image_words = in.h * in.w * wpp;
  const Word* in_words = input.words().data();
  const Word* wt_words = layer.weights.words().data();
  std::vector<Word> out(out_shape.pixels() * out_wpp, 0);

  if (plan.pack_integrated) {
    exec.parallel_for(out_shape.pixels(), [&](std::size_t begin, std::size_t end) {
      Window win;
      win.spans.reserve(g.kernel_h);
      for (std::size_t p = begin; p < end; ++p) {
        const auto [n, oy, ox] = decompose(p, out_shape);
        window_at(g, in, wpp, oy, ox, win);
        const Word* base = in_words + n * image_words;
        const auto len = static_cast<std::int64_t>(win.cells * g.in_channels);
        Word* dst = out.data() + p * out_wpp;
        for (std::size_t g0 = 0; g0 < g.out_channels; g0 += 8) {
          const std::size_t count = std::min<std::size_t>(8, g.out_channels - g0);
          std::uint32_t mismatches[8] = {};
          for (const RowSpan& s : win.spans) {
            for (std::size_t j = 0; j < count; ++j) {
              const Word* filter = wt_words + (g0 + j) * filter_words;
              mismatches[j] += detail::xor_popcount(base + s.in_off, filter + s.wt_off, s.words);
            }
          }
          unsigned byte = 0;
          for (std::size_t j = 0; j < count; ++j) {
            const std::int64_t x1 = len - 2 * static_cast<std::int64_t>(mismatches[j]);
            byte |= static_cast<unsigned>(
                        threshold_bit(x1, layer.xi[g0 + j], layer.gamma_positive[g0 + j] != 0))
                    << j;
          }
          dst[g0 / 64] |= static_cast<Word>(byte) << (g0 % 64);
        }
      }
    });
    return BitTensor(out_shape, std::move(out));
  }

  // Separate plan: one binarized byte per channel, packed in a second pass.
  std::vector<std::uint8_t> bits(out_shape.count());
  exec.parallel_for(out_shape.pixels(), [&](std::size_t begin, std::size_t end) {
    Window win;
    win.spans.reserve(g.kernel_h);
    for (std::size_t p = begin; p < end; ++p) {
      const auto [n, oy, ox] = decompose(p, out_shape);
      window_at(g, in, wpp, oy, ox, win);
      const Word* base = in_words + n * image_words;
      const auto len = static_cast<std::int64_t>(win.cells * g.in_channels);
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        const Word* filter = wt_words + oc * filter_words;
        std::uint32_t mismatches = 0;
        for (const RowSpan& s : win.spans) {
          mismatches += detail::xor_popcount(base + s.in_off, filter + s.wt_off, s.words);
        }
        const std::int64_t x1 = len - 2 * static_cast<std::int64_t>(mismatches);
        bits[p * g.out_channels + oc] =
            threshold_bit(x1, layer.xi[oc], layer.gamma_positive[oc] != 0) ? 1 : 0;
      }
    }
  });
  exec.parallel_for(out_shape.pixels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      pack_pixel(bits.data() + p * g.out_channels, g.out_channels, out.data() + p * out_wpp);
    }
  });
  return BitTensor(out_shape, std::move(out));
}

BitTensor first_layer_conv(const ByteTensor& image, const FirstConvLayer& layer,
                           const Executor& exec) {
  layer.validate();
  const AccumTensor s = bitplane_conv_accumulate(image, layer.weights, layer.geometry, exec);
  return binarize_accumulators(s, layer.xi, layer.gamma_positive, exec);
}

BitTensor binary_maxpool(const BitTensor& input, const PoolGeometry& g, const Executor& exec) {
  const Shape out_shape = g.output_shape(input.shape());
  const Shape& in = input.shape();
  const std::size_t wpp = input.words_per_pixel();
  const auto in_words = input.words();
  std::vector<Word> out(out_shape.pixels() * wpp, 0);

  exec.parallel_for(out_shape.pixels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto [n, oy, ox] = decompose(p, out_shape);
      Word* dst = out.data() + p * wpp;
      const std::size_t y_end = std::min(in.h, oy * g.stride_h + g.window_h);
      const std::size_t x_end = std::min(in.w, ox * g.stride_w + g.window_w);
      for (std::size_t y = oy * g.stride_h; y < y_end; ++y) {
        for (std::size_t x = ox * g.stride_w; x < x_end; ++x) {
          const std::size_t src = input.word_index(n, y, x, 0);
          for (std::size_t k = 0; k < wpp; ++k) dst[k] |= in_words[src + k];
        }
      }
    }
  });
  return BitTensor(out_shape, std::move(out));
}

BitTensor binary_dense(const BitTensor& input, const BinaryDenseLayer& dense,
                       const Executor& exec) {
  const ConvGeometry& g = dense.layer.geometry;
  if (g.kernel_h != 1 || g.kernel_w != 1 || g.stride_h != 1 || g.stride_w != 1 || g.pad_h != 0 ||
      g.pad_w != 0) {
    throw InvalidParameterError("dense layers use a 1x1 geometry over the flattened input");
  }
  const Shape& s = input.shape();
  if (s.h * s.w * s.c != g.in_channels) {
    throw DimensionError("dense layer expects " + std::to_string(g.in_channels) +
                         " inputs, got " + std::to_string(s.h * s.w * s.c));
  }
  return fused_binary_conv(flatten_channels(input), dense.layer, exec);
}

FloatTensor output_conv(const BitTensor& input, const OutputConvLayer& layer,
                        const Executor& exec) {
  layer.validate();
  if (layer.flatten_input) {
    const Shape& s = input.shape();
    if (s.h * s.w * s.c != layer.geometry.in_channels) {
      throw DimensionError("dense output layer expects " +
                           std::to_string(layer.geometry.in_channels) + " inputs, got " +
                           std::to_string(s.h * s.w * s.c));
    }
    return finish_output(
        binary_conv_accumulate(flatten_channels(input), layer.weights, layer.geometry, exec), layer,
        exec);
  }
  return finish_output(binary_conv_accumulate(input, layer.weights, layer.geometry, exec), layer,
                       exec);
}

FloatTensor output_conv(const ByteTensor& image, const OutputConvLayer& layer,
                        const Executor& exec) {
  layer.validate();
  if (layer.flatten_input) {
    throw InvalidParameterError("a dense output layer cannot consume the image directly");
  }
  return finish_output(bitplane_conv_accumulate(image, layer.weights, layer.geometry, exec), layer,
                       exec);
}

}  // namespace bnn
