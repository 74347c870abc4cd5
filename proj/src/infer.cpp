#include <chrono>

#include "bnn/graph.hpp"

namespace bnn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const BitTensor& bits_of(const Activation& a) { return std::get<BitTensor>(a); }

Activation run_layer(const Layer& layer, const ByteTensor& img, const Activation* prev,
                     const Executor& exec) {
  return std::visit(
      Overloaded{
          [&](const FirstConvLayer& l) -> Activation { return first_layer_conv(img, l, exec); },
          [&](const FusedConvLayer& l) -> Activation {
            return fused_binary_conv(bits_of(*prev), l, exec);
          },
          [&](const BinaryDenseLayer& l) -> Activation {
            return binary_dense(bits_of(*prev), l, exec);
          },
          [&](const PoolGeometry& g) -> Activation {
            return binary_maxpool(bits_of(*prev), g, exec);
          },
          [&](const OutputConvLayer& l) -> Activation {
            if (prev == nullptr) return output_conv(img, l, exec);
            return output_conv(bits_of(*prev), l, exec);
          },
      },
      layer);
}

void check_input(const NetworkGraph& graph, const ByteTensor& img) {
  if (img.shape() != graph.input_shape()) {
    throw DimensionError("input shape " + img.shape().to_string() + " does not match network input " +
                         graph.input_shape().to_string());
  }
}

}  // namespace

InferResult infer(const NetworkGraph& graph, const ByteTensor& img, const Executor& exec) {
  using Clock = std::chrono::steady_clock;
  check_input(graph, img);

  InferResult result;
  result.layer_ms.reserve(graph.size());
  const auto start = Clock::now();
  Activation current;
  bool have_prev = false;
  for (const Layer& layer : graph.layers()) {
    const auto t0 = Clock::now();
    Activation next = run_layer(layer, img, have_prev ? &current : nullptr, exec);
    const auto t1 = Clock::now();
    result.layer_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    current = std::move(next);
    have_prev = true;
  }
  result.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  result.output = std::get<FloatTensor>(std::move(current));
  return result;
}

std::vector<Activation> infer_trace(const NetworkGraph& graph, const ByteTensor& img,
                                    const Executor& exec) {
  check_input(graph, img);
  std::vector<Activation> trace;
  trace.reserve(graph.size());
  for (const Layer& layer : graph.layers()) {
    trace.push_back(run_layer(layer, img, trace.empty() ? nullptr : &trace.back(), exec));
  }
  return trace;
}

}  // namespace bnn
