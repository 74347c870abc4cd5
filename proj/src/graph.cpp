#include "bnn/graph.hpp"

#include <limits>
#include <string>

namespace bnn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string at_index(std::size_t i) { return "layer " + std::to_string(i) + ": "; }

void check_accumulator_range(std::size_t window_len, std::int64_t max_input, std::size_t i) {
  const auto limit = static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max());
  if (static_cast<std::uint64_t>(window_len) * static_cast<std::uint64_t>(max_input) > limit) {
    throw GraphError(at_index(i) + "window of " + std::to_string(window_len) +
                     " inputs would overflow a 32-bit accumulator");
  }
}

RawLayerSpec make_spec(LayerKind kind) {
  RawLayerSpec s;
  s.kind = kind;
  return s;
}

std::vector<float> unpack_weights(const BitTensor& w) {
  const SignTensor signs = unpack_channels(w);
  std::vector<float> out(signs.size());
  const auto d = signs.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(d[i]);
  return out;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::dense: return "dense";
    case LayerKind::pool: return "pool";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::binarize: return "binarize";
    case LayerKind::output_conv: return "output-conv";
  }
  return "unknown";
}

RawLayerSpec RawLayerSpec::make_conv(ConvGeometry g, std::vector<float> weights,
                                     std::vector<float> bias) {
  RawLayerSpec s = make_spec(LayerKind::conv);
  s.conv = g;
  s.weights = std::move(weights);
  s.bias = std::move(bias);
  return s;
}

RawLayerSpec RawLayerSpec::make_dense(std::size_t in_features, std::size_t out_features,
                                      std::vector<float> weights, std::vector<float> bias) {
  RawLayerSpec s = make_spec(LayerKind::dense);
  s.conv = ConvGeometry{1, 1, 1, 1, 0, 0, in_features, out_features};
  s.weights = std::move(weights);
  s.bias = std::move(bias);
  return s;
}

RawLayerSpec RawLayerSpec::make_output_conv(ConvGeometry g, std::vector<float> weights,
                                            std::vector<float> bias) {
  RawLayerSpec s = make_conv(g, std::move(weights), std::move(bias));
  s.kind = LayerKind::output_conv;
  return s;
}

RawLayerSpec RawLayerSpec::make_batchnorm(BatchNormParams bn) {
  RawLayerSpec s = make_spec(LayerKind::batchnorm);
  s.bn = std::move(bn);
  return s;
}

RawLayerSpec RawLayerSpec::make_binarize() { return make_spec(LayerKind::binarize); }

RawLayerSpec RawLayerSpec::make_pool(PoolGeometry g) {
  RawLayerSpec s = make_spec(LayerKind::pool);
  s.pool = g;
  return s;
}

BitTensor pack_weights(const ConvGeometry& g, const std::vector<float>& weights) {
  g.validate();
  const Shape shape = g.weight_shape();
  if (weights.size() != shape.count()) {
    throw DimensionError("expected " + std::to_string(shape.count()) + " weights for shape " +
                         shape.to_string() + ", got " + std::to_string(weights.size()));
  }
  const std::size_t wpp = words_for_bits<std::uint64_t>(shape.c);
  std::vector<std::uint64_t> words(shape.pixels() * wpp, 0);
  for (std::size_t p = 0; p < shape.pixels(); ++p) {
    for (std::size_t c = 0; c < shape.c; ++c) {
      const float v = weights[p * shape.c + c];
      if (v == 1.0f) {
        words[p * wpp + c / 64] |= std::uint64_t{1} << (c % 64);
      } else if (v != -1.0f) {
        throw InvalidValueError("weight " + std::to_string(p * shape.c + c) + " is " +
                                std::to_string(v) + ", expected +1 or -1");
      }
    }
  }
  return BitTensor(shape, std::move(words));
}

FusedConvLayer fuse(const RawLayerSpec& conv, const RawLayerSpec& bn, const RawLayerSpec& binarize,
                    std::size_t channel_limit) {
  if (conv.kind != LayerKind::conv && conv.kind != LayerKind::dense) {
    throw GraphError("fuse: first layer must be conv or dense, got " +
                     std::string(to_string(conv.kind)));
  }
  if (bn.kind != LayerKind::batchnorm) {
    throw GraphError("fuse: expected batchnorm, got " + std::string(to_string(bn.kind)));
  }
  if (binarize.kind != LayerKind::binarize) {
    throw GraphError("fuse: expected binarize, got " + std::string(to_string(binarize.kind)));
  }
  if (bn.bn.channels() != conv.conv.out_channels) {
    throw DimensionError("batch norm has " + std::to_string(bn.bn.channels()) +
                         " channels, conv produces " + std::to_string(conv.conv.out_channels));
  }

  ChannelThresholds t = compute_thresholds(conv.bias, bn.bn);
  FusedConvLayer layer;
  layer.geometry = conv.conv;
  layer.weights = pack_weights(conv.conv, conv.weights);
  layer.xi = std::move(t.xi);
  layer.gamma_positive = std::move(t.gamma_positive);
  layer.pack_integrated = schedule_conv(conv.conv, channel_limit).pack_integrated;
  layer.bias = conv.bias;
  layer.bn = bn.bn;
  return layer;
}

std::string_view layer_kind_name(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const FirstConvLayer&) { return std::string_view("first_conv"); },
                        [](const FusedConvLayer&) { return std::string_view("fused_conv"); },
                        [](const BinaryDenseLayer&) { return std::string_view("dense"); },
                        [](const PoolGeometry&) { return std::string_view("maxpool"); },
                        [](const OutputConvLayer& l) {
                          return std::string_view(l.flatten_input ? "output_dense" : "output_conv");
                        },
                    },
                    layer);
}

NetworkGraph::NetworkGraph(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(input_shape), layers_(std::move(layers)) {
  input_shape_.validate();
  if (layers_.empty()) throw GraphError("a network needs at least one layer");
  if (!std::holds_alternative<OutputConvLayer>(layers_.back())) {
    throw GraphError("the last layer must produce real values (output conv or dense)");
  }

  std::size_t convs = 0, pools = 0, fcs = 0;
  Shape current = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool first = i == 0;
    const bool last = i + 1 == layers_.size();
    try {
      current = std::visit(
          Overloaded{
              [&](const FirstConvLayer& l) {
                if (!first) throw GraphError(at_index(i) + "a bit-plane conv must come first");
                l.validate();
                check_accumulator_range(l.geometry.window_len(), 255, i);
                names_.push_back("conv" + std::to_string(++convs));
                return l.geometry.output_shape(current);
              },
              [&](const FusedConvLayer& l) {
                if (first) throw GraphError(at_index(i) + "the image must enter through a bit-plane conv");
                l.validate();
                check_accumulator_range(l.geometry.window_len(), 1, i);
                names_.push_back("conv" + std::to_string(++convs));
                return l.geometry.output_shape(current);
              },
              [&](const BinaryDenseLayer& l) {
                if (first) throw GraphError(at_index(i) + "a dense layer cannot consume the image");
                l.layer.validate();
                check_accumulator_range(l.layer.geometry.window_len(), 1, i);
                const std::size_t flat = current.h * current.w * current.c;
                if (flat != l.layer.geometry.in_channels) {
                  throw DimensionError("dense layer expects " +
                                       std::to_string(l.layer.geometry.in_channels) +
                                       " inputs, previous layer yields " + std::to_string(flat));
                }
                names_.push_back("fc" + std::to_string(++fcs));
                return Shape{current.n, 1, 1, l.layer.geometry.out_channels};
              },
              [&](const PoolGeometry& g) {
                if (first) throw GraphError(at_index(i) + "pooling cannot consume the image");
                names_.push_back("pool" + std::to_string(++pools));
                return g.output_shape(current);
              },
              [&](const OutputConvLayer& l) {
                if (!last) throw GraphError(at_index(i) + "a real-valued layer must be last");
                l.validate();
                check_accumulator_range(l.geometry.window_len(), first ? 255 : 1, i);
                if (l.flatten_input) {
                  if (first) throw GraphError(at_index(i) + "a dense layer cannot consume the image");
                  const std::size_t flat = current.h * current.w * current.c;
                  if (flat != l.geometry.in_channels) {
                    throw DimensionError("dense output expects " +
                                         std::to_string(l.geometry.in_channels) +
                                         " inputs, previous layer yields " + std::to_string(flat));
                  }
                  names_.push_back("fc" + std::to_string(++fcs));
                  return Shape{current.n, 1, 1, l.geometry.out_channels};
                }
                names_.push_back("conv" + std::to_string(++convs));
                return l.geometry.output_shape(current);
              },
          },
          layers_[i]);
    } catch (const DimensionError& e) {
      throw GraphError(at_index(i) + "shape chain broken: " + e.what());
    }
    output_shapes_.push_back(current);
  }
}

NetworkGraph build(const std::vector<RawLayerSpec>& specs, const Shape& input_shape,
                   const BuildOptions& options) {
  if (specs.empty()) throw GraphError("cannot build an empty network");

  std::vector<Layer> layers;
  const std::size_t n = specs.size();
  auto kind_at = [&](std::size_t i) { return i < n ? specs[i].kind : LayerKind::pool; };
  auto has = [&](std::size_t i, LayerKind k) { return i < n && specs[i].kind == k; };

  std::size_t i = 0;
  while (i < n) {
    const RawLayerSpec& spec = specs[i];
    switch (spec.kind) {
      case LayerKind::conv:
      case LayerKind::dense: {
        const bool is_dense = spec.kind == LayerKind::dense;
        FusedConvLayer fused;
        if (has(i + 1, LayerKind::batchnorm) && has(i + 2, LayerKind::binarize)) {
          fused = fuse(spec, specs[i + 1], specs[i + 2], options.integrate_channel_limit);
          i += 3;
        } else if (has(i + 1, LayerKind::binarize)) {
          fused = fuse(spec, RawLayerSpec::make_batchnorm(BatchNormParams::identity(spec.conv.out_channels)),
                       specs[i + 1], options.integrate_channel_limit);
          i += 2;
        } else if (is_dense && (i + 1 == n || (has(i + 1, LayerKind::batchnorm) && i + 2 == n))) {
          OutputConvLayer out;
          out.geometry = spec.conv;
          out.weights = pack_weights(spec.conv, spec.weights);
          out.bias = spec.bias;
          out.flatten_input = true;
          if (i + 1 < n) out.bn = specs[i + 1].bn;
          layers.emplace_back(std::move(out));
          i = n;
          break;
        } else {
          throw GraphError(at_index(i) + std::string(to_string(spec.kind)) +
                           " must be followed by batchnorm + binarize (or be a trailing dense); "
                           "use output-conv for a real-valued conv, next is " +
                           std::string(i + 1 < n ? to_string(kind_at(i + 1)) : "end of network"));
        }
        if (is_dense) {
          layers.emplace_back(BinaryDenseLayer{std::move(fused)});
        } else if (layers.empty()) {
          layers.emplace_back(FirstConvLayer{fused.geometry, std::move(fused.weights),
                                             std::move(fused.xi), std::move(fused.gamma_positive),
                                             std::move(fused.bias), std::move(fused.bn)});
        } else {
          layers.emplace_back(std::move(fused));
        }
        break;
      }
      case LayerKind::output_conv: {
        OutputConvLayer out;
        out.geometry = spec.conv;
        out.weights = pack_weights(spec.conv, spec.weights);
        out.bias = spec.bias;
        std::size_t next = i + 1;
        if (has(next, LayerKind::batchnorm)) {
          out.bn = specs[next].bn;
          ++next;
        }
        if (next != n) throw GraphError(at_index(i) + "output-conv must be the last layer");
        layers.emplace_back(std::move(out));
        i = n;
        break;
      }
      case LayerKind::pool:
        layers.emplace_back(spec.pool);
        ++i;
        break;
      case LayerKind::batchnorm:
      case LayerKind::binarize:
        throw GraphError(at_index(i) + "dangling " + std::string(to_string(spec.kind)) +
                         " with no preceding conv or dense");
    }
  }
  return NetworkGraph(input_shape, std::move(layers));
}

std::vector<RawLayerSpec> export_specs(const NetworkGraph& graph) {
  std::vector<RawLayerSpec> specs;
  auto binarized = [&](LayerKind kind, const ConvGeometry& g, const BitTensor& w,
                       const std::vector<float>& bias, const BatchNormParams& bn) {
    RawLayerSpec s = RawLayerSpec::make_conv(g, unpack_weights(w), bias);
    s.kind = kind;
    specs.push_back(std::move(s));
    specs.push_back(RawLayerSpec::make_batchnorm(bn));
    specs.push_back(RawLayerSpec::make_binarize());
  };
  for (const Layer& layer : graph.layers()) {
    std::visit(Overloaded{
                   [&](const FirstConvLayer& l) {
                     binarized(LayerKind::conv, l.geometry, l.weights, l.bias, l.bn);
                   },
                   [&](const FusedConvLayer& l) {
                     binarized(LayerKind::conv, l.geometry, l.weights, l.bias, l.bn);
                   },
                   [&](const BinaryDenseLayer& l) {
                     binarized(LayerKind::dense, l.layer.geometry, l.layer.weights, l.layer.bias,
                               l.layer.bn);
                   },
                   [&](const PoolGeometry& g) { specs.push_back(RawLayerSpec::make_pool(g)); },
                   [&](const OutputConvLayer& l) {
                     RawLayerSpec s =
                         RawLayerSpec::make_output_conv(l.geometry, unpack_weights(l.weights), l.bias);
                     if (l.flatten_input) s.kind = LayerKind::dense;
                     specs.push_back(std::move(s));
                     if (l.bn) specs.push_back(RawLayerSpec::make_batchnorm(*l.bn));
                   },
               },
               layer);
  }
  return specs;
}

NetworkBuilder& NetworkBuilder::conv(ConvGeometry g, std::vector<float> weights,
                                     std::vector<float> bias) {
  specs_.push_back(RawLayerSpec::make_conv(g, std::move(weights), std::move(bias)));
  return *this;
}

NetworkBuilder& NetworkBuilder::dense(std::size_t in_features, std::size_t out_features,
                                      std::vector<float> weights, std::vector<float> bias) {
  specs_.push_back(
      RawLayerSpec::make_dense(in_features, out_features, std::move(weights), std::move(bias)));
  return *this;
}

NetworkBuilder& NetworkBuilder::batchnorm(BatchNormParams bn) {
  specs_.push_back(RawLayerSpec::make_batchnorm(std::move(bn)));
  return *this;
}

NetworkBuilder& NetworkBuilder::binarize() {
  specs_.push_back(RawLayerSpec::make_binarize());
  return *this;
}

NetworkBuilder& NetworkBuilder::pool(PoolGeometry g) {
  specs_.push_back(RawLayerSpec::make_pool(g));
  return *this;
}

NetworkBuilder& NetworkBuilder::output_conv(ConvGeometry g, std::vector<float> weights,
                                            std::vector<float> bias) {
  specs_.push_back(RawLayerSpec::make_output_conv(g, std::move(weights), std::move(bias)));
  return *this;
}

NetworkGraph NetworkBuilder::build(const BuildOptions& options) const {
  return bnn::build(specs_, input_, options);
}

}  // namespace bnn
