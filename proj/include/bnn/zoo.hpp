#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bnn/graph.hpp"

/// Random-weight networks with the layer structure of common benchmark
/// models. Weights are uniform +/-1; batch-norm statistics are scaled to each
/// layer's accumulator range so that activations stay mixed.
namespace bnn::zoo {

struct Topology {
  std::string name;
  Shape input;
  std::vector<RawLayerSpec> specs;
};

/// Nine convolutions; the five 2x downsampling steps are strided convs, so
/// the built graph has exactly nine layers. Last layer is a 1x1 output conv
/// with 125 channels.
Topology yolov2_tiny(std::size_t input_hw = 64, std::uint64_t seed = 1);

/// Five convs, three 3x3/2 max pools, three dense layers (4096, 4096, 1000).
Topology alexnet(std::size_t input_hw = 64, std::uint64_t seed = 1);

/// Thirteen 3x3 convs in five blocks with 2x2 pools, three dense layers.
/// input_hw = 224 gives the full-size parameter count.
Topology vgg16(std::size_t input_hw = 32, std::uint64_t seed = 1);

/// Small network touching every layer type; used by fast tests.
Topology tiny(std::uint64_t seed = 1);

/// "yolov2-tiny", "alexnet", "vgg16" or "tiny"; input_hw == 0 selects the
/// topology's default size. Throws InvalidParameterError.
Topology by_name(std::string_view name, std::size_t input_hw, std::uint64_t seed);

std::vector<float> random_signs(std::size_t count, std::mt19937_64& rng);

ByteTensor random_image(const Shape& shape, std::mt19937_64& rng);

}  // namespace bnn::zoo
