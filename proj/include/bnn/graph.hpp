#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bnn/executor.hpp"
#include "bnn/layers.hpp"
#include "bnn/tensor.hpp"

namespace bnn {

enum class LayerKind { conv, dense, pool, batchnorm, binarize, output_conv };

std::string_view to_string(LayerKind kind);

/// One unfused layer as exported by a trainer.
///
/// conv / dense / output_conv use `conv` and `weights` (+/-1 floats laid out
/// (out, kh, kw, in); dense weights are (out, flattened input)). `bias` may
/// be empty. batchnorm uses `bn`; pool uses `pool`; binarize carries nothing.
struct RawLayerSpec {
  LayerKind kind = LayerKind::conv;
  ConvGeometry conv;
  PoolGeometry pool;
  std::vector<float> weights;
  std::vector<float> bias;
  BatchNormParams bn;

  static RawLayerSpec make_conv(ConvGeometry g, std::vector<float> weights,
                                std::vector<float> bias = {});
  /// `in_features` is the flattened length of the incoming activation.
  static RawLayerSpec make_dense(std::size_t in_features, std::size_t out_features,
                                 std::vector<float> weights, std::vector<float> bias = {});
  static RawLayerSpec make_output_conv(ConvGeometry g, std::vector<float> weights,
                                       std::vector<float> bias = {});
  static RawLayerSpec make_batchnorm(BatchNormParams bn);
  static RawLayerSpec make_binarize();
  static RawLayerSpec make_pool(PoolGeometry g);
};

/// Packs +/-1 float weights (out, kh, kw, in) into a weight tensor.
/// Throws InvalidValueError naming the offending index on any other value.
BitTensor pack_weights(const ConvGeometry& g, const std::vector<float>& weights);

/// Folds conv + batchnorm + binarize into one thresholded layer.
FusedConvLayer fuse(const RawLayerSpec& conv, const RawLayerSpec& bn, const RawLayerSpec& binarize,
                    std::size_t channel_limit = kDefaultIntegrateChannelLimit);

using Layer = std::variant<FirstConvLayer, FusedConvLayer, BinaryDenseLayer, PoolGeometry,
                           OutputConvLayer>;

struct BuildOptions {
  /// Input-channel limit up to which convs pack 8 channels per task in-register.
  std::size_t integrate_channel_limit = kDefaultIntegrateChannelLimit;
};

/// Immutable linear chain of executable layers. The first layer consumes the
/// 8-bit input image; the last produces real values.
class NetworkGraph {
 public:
  /// Validates the shape chain and layer parameters; throws GraphError.
  NetworkGraph(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t size() const noexcept { return layers_.size(); }
  /// Output shape of layer i.
  const Shape& output_shape(std::size_t i) const { return output_shapes_.at(i); }
  const Shape& final_shape() const { return output_shapes_.back(); }
  /// conv1, conv2, pool1, fc1, ... in order of appearance.
  const std::string& layer_name(std::size_t i) const { return names_.at(i); }

  /// Mutable access for fault-injection tests. Bypasses validation.
  Layer& mutable_layer_for_testing(std::size_t i) { return layers_.at(i); }

  friend bool operator==(const NetworkGraph&, const NetworkGraph&) = default;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> output_shapes_;
  std::vector<std::string> names_;
};

std::string_view layer_kind_name(const Layer& layer);

/// Fuses every conv/dense + batchnorm + binarize run and checks the chain.
/// A conv/dense directly followed by binarize gets an identity batch norm.
/// A trailing dense (optionally + batchnorm) becomes a real-valued output.
NetworkGraph build(const std::vector<RawLayerSpec>& specs, const Shape& input_shape,
                   const BuildOptions& options = {});

/// Reconstructs the unfused layer list (weights back as +/-1 floats, raw
/// bias and batch-norm parameters) from a graph.
std::vector<RawLayerSpec> export_specs(const NetworkGraph& graph);

/// Incremental builder over RawLayerSpec.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(Shape input_shape) : input_(input_shape) {}

  NetworkBuilder& conv(ConvGeometry g, std::vector<float> weights, std::vector<float> bias = {});
  NetworkBuilder& dense(std::size_t in_features, std::size_t out_features,
                        std::vector<float> weights, std::vector<float> bias = {});
  NetworkBuilder& batchnorm(BatchNormParams bn);
  NetworkBuilder& binarize();
  NetworkBuilder& pool(PoolGeometry g);
  NetworkBuilder& output_conv(ConvGeometry g, std::vector<float> weights,
                              std::vector<float> bias = {});

  const std::vector<RawLayerSpec>& specs() const noexcept { return specs_; }
  NetworkGraph build(const BuildOptions& options = {}) const;

 private:
  Shape input_;
  std::vector<RawLayerSpec> specs_;
};

/// Activation flowing between layers.
using Activation = std::variant<BitTensor, FloatTensor>;

struct InferResult {
  FloatTensor output;
  /// Wall time of each layer in milliseconds (steady clock).
  std::vector<double> layer_ms;
  double total_ms = 0.0;
};

/// Runs every layer in order. Throws DimensionError if img does not match
/// the graph's input shape.
InferResult infer(const NetworkGraph& graph, const ByteTensor& img,
                  const Executor& exec = serial_executor());

/// Like infer, but keeps every layer's output.
std::vector<Activation> infer_trace(const NetworkGraph& graph, const ByteTensor& img,
                                    const Executor& exec = serial_executor());

}  // namespace bnn
