#include "bnn/zoo.hpp"

#include <cmath>

namespace bnn::zoo {
namespace {

// Standard deviation of a uniform byte, the spread of a first-layer input.
constexpr double kByteSpread = 147.0;

class NetBuilder {
 public:
  NetBuilder(std::string name, Shape input, std::uint64_t seed)
      : rng_(seed), shape_(input) {
    topo_.name = std::move(name);
    topo_.input = input;
  }

  void conv(std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad) {
    const ConvGeometry g{kernel, kernel, stride, stride, pad, pad, shape_.c, out};
    const double scale = spread(g.window_len());
    topo_.specs.push_back(RawLayerSpec::make_conv(g, random_signs(g.weight_shape().count(), rng_),
                                                  random_bias(out, scale)));
    topo_.specs.push_back(RawLayerSpec::make_batchnorm(random_bn(out, scale)));
    topo_.specs.push_back(RawLayerSpec::make_binarize());
    shape_ = g.output_shape(shape_);
    first_ = false;
  }

  void pool(std::size_t window, std::size_t stride) {
    const PoolGeometry g{window, window, stride, stride};
    topo_.specs.push_back(RawLayerSpec::make_pool(g));
    shape_ = g.output_shape(shape_);
  }

  void dense(std::size_t out) {
    const std::size_t in = flat();
    const double scale = spread(in);
    topo_.specs.push_back(
        RawLayerSpec::make_dense(in, out, random_signs(in * out, rng_), random_bias(out, scale)));
    topo_.specs.push_back(RawLayerSpec::make_batchnorm(random_bn(out, scale)));
    topo_.specs.push_back(RawLayerSpec::make_binarize());
    shape_ = Shape{shape_.n, 1, 1, out};
  }

  void output_conv(std::size_t out, std::size_t kernel, std::size_t pad) {
    const ConvGeometry g{kernel, kernel, 1, 1, pad, pad, shape_.c, out};
    topo_.specs.push_back(RawLayerSpec::make_output_conv(
        g, random_signs(g.weight_shape().count(), rng_), random_bias(out, spread(g.window_len()))));
    shape_ = g.output_shape(shape_);
  }

  void output_dense(std::size_t out) {
    const std::size_t in = flat();
    topo_.specs.push_back(
        RawLayerSpec::make_dense(in, out, random_signs(in * out, rng_), random_bias(out, spread(in))));
    shape_ = Shape{shape_.n, 1, 1, out};
  }

  Topology finish() { return std::move(topo_); }

 private:
  std::size_t flat() const { return shape_.h * shape_.w * shape_.c; }

  double spread(std::size_t window_len) const {
    return (first_ ? kByteSpread : 1.0) * std::sqrt(static_cast<double>(window_len));
  }

  std::vector<float> random_bias(std::size_t n, double scale) {
    std::normal_distribution<double> dist(0.0, 0.1 * scale);
    std::vector<float> b(n);
    for (auto& v : b) v = static_cast<float>(dist(rng_));
    return b;
  }

  BatchNormParams random_bn(std::size_t n, double scale) {
    std::uniform_real_distribution<double> magnitude(0.5, 1.5);
    std::normal_distribution<double> mean(0.0, 0.5 * scale);
    std::normal_distribution<double> beta(0.0, 0.5);
    std::bernoulli_distribution negative(0.3);
    BatchNormParams bn;
    for (std::size_t c = 0; c < n; ++c) {
      const double g = magnitude(rng_);
      bn.gamma.push_back(static_cast<float>(negative(rng_) ? -g : g));
      bn.beta.push_back(static_cast<float>(beta(rng_)));
      bn.mean.push_back(static_cast<float>(mean(rng_)));
      bn.sigma.push_back(static_cast<float>(magnitude(rng_) * scale));
    }
    return bn;
  }

  std::mt19937_64 rng_;
  Shape shape_;
  bool first_ = true;
  Topology topo_;
};

}  // namespace

std::vector<float> random_signs(std::size_t count, std::mt19937_64& rng) {
  std::vector<float> out(count);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 64 == 0) bits = rng();
    out[i] = (bits >> (i % 64)) & 1u ? 1.0f : -1.0f;
  }
  return out;
}

ByteTensor random_image(const Shape& shape, std::mt19937_64& rng) {
  shape.validate();
  std::vector<std::uint8_t> data(shape.count());
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i % 8 == 0) bits = rng();
    data[i] = static_cast<std::uint8_t>(bits >> (8 * (i % 8)));
  }
  return ByteTensor(shape, std::move(data));
}

Topology yolov2_tiny(std::size_t input_hw, std::uint64_t seed) {
  NetBuilder net("yolov2-tiny", Shape{1, input_hw, input_hw, 3}, seed);
  for (const std::size_t out : {16, 32, 64, 128, 256}) net.conv(out, 3, 2, 1);
  net.conv(512, 3, 1, 1);
  net.conv(1024, 3, 1, 1);
  net.conv(1024, 3, 1, 1);
  net.output_conv(125, 1, 0);
  return net.finish();
}

Topology alexnet(std::size_t input_hw, std::uint64_t seed) {
  NetBuilder net("alexnet", Shape{1, input_hw, input_hw, 3}, seed);
  net.conv(96, 11, 4, 2);
  net.pool(3, 2);
  net.conv(256, 5, 1, 2);
  net.pool(3, 2);
  net.conv(384, 3, 1, 1);
  net.conv(384, 3, 1, 1);
  net.conv(256, 3, 1, 1);
  net.pool(3, 2);
  net.dense(4096);
  net.dense(4096);
  net.output_dense(1000);
  return net.finish();
}

Topology vgg16(std::size_t input_hw, std::uint64_t seed) {
  NetBuilder net("vgg16", Shape{1, input_hw, input_hw, 3}, seed);
  const std::size_t blocks[5][2] = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
  for (const auto& [channels, convs] : blocks) {
    for (std::size_t i = 0; i < convs; ++i) net.conv(channels, 3, 1, 1);
    net.pool(2, 2);
  }
  net.dense(4096);
  net.dense(4096);
  net.output_dense(1000);
  return net.finish();
}

Topology tiny(std::uint64_t seed) {
  NetBuilder net("tiny", Shape{1, 12, 12, 3}, seed);
  net.conv(8, 3, 1, 1);
  net.pool(2, 2);
  net.conv(70, 3, 1, 1);
  net.conv(300, 3, 2, 0);
  net.pool(2, 1);
  net.dense(40);
  net.output_dense(10);
  return net.finish();
}

Topology by_name(std::string_view name, std::size_t input_hw, std::uint64_t seed) {
  if (name == "yolov2-tiny") return input_hw ? yolov2_tiny(input_hw, seed) : yolov2_tiny(64, seed);
  if (name == "alexnet") return input_hw ? alexnet(input_hw, seed) : alexnet(64, seed);
  if (name == "vgg16") return input_hw ? vgg16(input_hw, seed) : vgg16(32, seed);
  if (name == "tiny") return tiny(seed);
  throw InvalidParameterError("unknown topology '" + std::string(name) +
                              "' (expected yolov2-tiny, alexnet, vgg16 or tiny)");
}

}  // namespace bnn::zoo
