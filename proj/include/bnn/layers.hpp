#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bnn/executor.hpp"
#include "bnn/tensor.hpp"

namespace bnn {

struct ConvGeometry {
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  /// Throws InvalidParameterError on a zero kernel, stride or channel count.
  void validate() const;

  /// Output extent floor((in + 2*pad - kernel) / stride) + 1; throws
  /// DimensionError when the window does not fit even once.
  std::size_t out_h(std::size_t in_h) const;
  std::size_t out_w(std::size_t in_w) const;

  /// Throws DimensionError if in.c != in_channels.
  Shape output_shape(const Shape& in) const;

  /// (out_channels, kernel_h, kernel_w, in_channels)
  Shape weight_shape() const { return {out_channels, kernel_h, kernel_w, in_channels}; }
  std::size_t window_len() const { return kernel_h * kernel_w * in_channels; }

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// Max-pooling window. Output extent is ceil(in / stride); window cells that
/// fall past the input edge are ignored.
struct PoolGeometry {
  std::size_t window_h = 2;
  std::size_t window_w = 2;
  std::size_t stride_h = 2;
  std::size_t stride_w = 2;

  void validate() const;
  Shape output_shape(const Shape& in) const;

  friend bool operator==(const PoolGeometry&, const PoolGeometry&) = default;
};

/// Per-channel batch-norm statistics as exported by a trainer. `sigma` is the
/// standard deviation with any variance epsilon already folded in.
struct BatchNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> mean;
  std::vector<float> sigma;

  std::size_t channels() const noexcept { return gamma.size(); }

  /// Throws DimensionError on ragged arrays and InvalidParameterError on
  /// non-finite values or sigma <= 0.
  void validate(std::size_t channels) const;

  static BatchNormParams identity(std::size_t channels);

  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

/// Offline thresholds for a binarized conv channel.
struct ChannelThresholds {
  std::vector<double> xi;
  std::vector<std::uint8_t> gamma_positive;
};

/// Folds bias and batch norm into one threshold per channel:
/// xi = mean - beta * sigma / gamma - bias. An empty `bias` means zero.
/// Throws PrunableChannelError for gamma == 0 and InvalidParameterError for
/// sigma <= 0 or non-finite inputs.
ChannelThresholds compute_thresholds(std::span<const float> bias, const BatchNormParams& bn);

/// Binarizes a conv accumulator against its threshold without branching:
/// bit = (x1 < xi) xor (gamma > 0), or (x1 == xi).
inline bool threshold_bit(std::int64_t x1, double xi, bool gamma_positive) noexcept {
  const double x = static_cast<double>(x1);
  const bool below = x < xi;
  const bool tie = x == xi;
  return (below != gamma_positive) | tie;
}

/// Binary convolution with bias, batch norm and sign folded into thresholds.
struct FusedConvLayer {
  ConvGeometry geometry;
  BitTensor weights;  // weight_shape(), sign encoded
  std::vector<double> xi;
  std::vector<std::uint8_t> gamma_positive;
  bool pack_integrated = true;

  // Source parameters the thresholds were derived from.
  std::vector<float> bias;
  BatchNormParams bn;

  /// Shape and finiteness checks shared by every binarized layer type.
  void validate() const;

  friend bool operator==(const FusedConvLayer&, const FusedConvLayer&) = default;
};

/// Image-facing layer: consumes 8-bit input through its bit-planes.
struct FirstConvLayer {
  ConvGeometry geometry;
  BitTensor weights;
  std::vector<double> xi;
  std::vector<std::uint8_t> gamma_positive;

  std::vector<float> bias;
  BatchNormParams bn;

  void validate() const;

  friend bool operator==(const FirstConvLayer&, const FirstConvLayer&) = default;
};

/// Fully connected binarized layer over the flattened input. `layer` uses a
/// 1x1 geometry whose in_channels equals the flattened length.
struct BinaryDenseLayer {
  FusedConvLayer layer;

  friend bool operator==(const BinaryDenseLayer&, const BinaryDenseLayer&) = default;
};

/// Real-valued last layer: binary accumulation, then bias and optional batch
/// norm in floating point. With flatten_input it acts as a dense layer.
struct OutputConvLayer {
  ConvGeometry geometry;
  BitTensor weights;
  std::vector<float> bias;
  std::optional<BatchNormParams> bn;
  bool flatten_input = false;

  void validate() const;

  friend bool operator==(const OutputConvLayer&, const OutputConvLayer&) = default;
};

inline constexpr std::size_t kDefaultIntegrateChannelLimit = 256;

/// How a binarized conv is split into tasks.
struct ConvPlan {
  /// true: each task binarizes 8 output channels and packs them into a byte
  /// in-register. false: per-channel binarized bytes, then a packing pass.
  bool pack_integrated = true;
  std::size_t channels_per_task = 8;
};

ConvPlan schedule_conv(const ConvGeometry& geometry,
                       std::size_t channel_limit = kDefaultIntegrateChannelLimit);

using AccumTensor = DenseTensor<std::int32_t>;

/// Raw binary-conv accumulators x1 (NHWC, one per output channel). Padded
/// border cells are left out of each window's length.
AccumTensor binary_conv_accumulate(const BitTensor& input, const BitTensor& weights,
                                   const ConvGeometry& geometry,
                                   const Executor& exec = serial_executor());

/// Exact integer convolution of an 8-bit image with +/-1 weights, summed over
/// the image's bit-planes.
AccumTensor bitplane_conv_accumulate(const ByteTensor& image, const BitTensor& weights,
                                     const ConvGeometry& geometry,
                                     const Executor& exec = serial_executor());

BitTensor fused_binary_conv(const BitTensor& input, const FusedConvLayer& layer,
                            const Executor& exec = serial_executor());

/// Same as above with an explicit plan instead of layer.pack_integrated.
BitTensor fused_binary_conv(const BitTensor& input, const FusedConvLayer& layer,
                            const ConvPlan& plan, const Executor& exec = serial_executor());

BitTensor first_layer_conv(const ByteTensor& image, const FirstConvLayer& layer,
                           const Executor& exec = serial_executor());

BitTensor binary_maxpool(const BitTensor& input, const PoolGeometry& geometry,
                         const Executor& exec = serial_executor());

BitTensor binary_dense(const BitTensor& input, const BinaryDenseLayer& layer,
                       const Executor& exec = serial_executor());

FloatTensor output_conv(const BitTensor& input, const OutputConvLayer& layer,
                        const Executor& exec = serial_executor());

/// Output layer applied directly to an image (single-layer networks).
FloatTensor output_conv(const ByteTensor& image, const OutputConvLayer& layer,
                        const Executor& exec = serial_executor());

}  // namespace bnn
