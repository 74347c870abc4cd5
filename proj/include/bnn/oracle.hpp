#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "bnn/graph.hpp"
#include "bnn/layers.hpp"
#include "bnn/tensor.hpp"

/// Full-precision reference path. Everything here works on unpacked double
/// tensors and unfused parameters, and shares no arithmetic with the packed
/// engine: convolutions are nested loops, batch norm is applied literally,
/// and binarization is x >= 0.
namespace bnn::oracle {

DoubleTensor to_real(const ByteTensor& t);
DoubleTensor to_real(const SignTensor& t);

/// Direct convolution of `input` with float weights laid out
/// (out, kh, kw, in). Cells outside the input contribute 0.
DoubleTensor conv(const DoubleTensor& input, std::span<const float> weights, const ConvGeometry& g);

/// x + bias, then gamma * (x - mean) / sigma + beta when `bn` is given.
DoubleTensor affine(const DoubleTensor& x, std::span<const float> bias,
                    const std::optional<BatchNormParams>& bn);

/// affine() followed by the sign rule: +1 iff the result is >= 0.
/// Throws InvalidParameterError when sigma <= 0.
SignTensor bn_sign(const DoubleTensor& x, std::span<const float> bias, const BatchNormParams& bn);

SignTensor sign(const DoubleTensor& x);

SignTensor maxpool(const SignTensor& x, const PoolGeometry& g);

/// Four-case threshold rule, written as a case analysis.
bool threshold_cases(double x1, double xi, bool gamma_positive);

/// Oracle activation: +/-1 signs after binarization and pooling, reals at the end.
using Activation = std::variant<SignTensor, FloatTensor>;

/// Runs an unfused layer list op by op.
class OracleNet {
 public:
  OracleNet(std::vector<RawLayerSpec> specs, Shape input_shape);

  /// Builds the oracle from a graph's exported raw parameters.
  static OracleNet from_graph(const NetworkGraph& graph);

  /// One entry per point where the engine has a layer boundary: after each
  /// binarize, after each pool, and the final real output.
  std::vector<Activation> run_trace(const ByteTensor& img) const;
  FloatTensor run(const ByteTensor& img) const;

  const std::vector<RawLayerSpec>& specs() const noexcept { return specs_; }

 private:
  std::vector<RawLayerSpec> specs_;
  Shape input_shape_;
};

/// Writes every parameter of `specs` as float32 (per layer: kind, geometry,
/// weights, bias, batch norm). This is the full-precision baseline the
/// packed model format is compared against. Returns the byte count written.
std::uint64_t write_float32_model(const std::vector<RawLayerSpec>& specs, std::ostream& out);

}  // namespace bnn::oracle
