#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bnn/harness.hpp"
#include "bnn/oracle.hpp"
#include "bnn/zoo.hpp"

namespace bnn {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0, Clock::time_point t1) {
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

// Index of the packed conv with the most binary multiply-accumulates.
std::optional<std::size_t> heaviest_conv(const NetworkGraph& g) {
  std::optional<std::size_t> best;
  double best_ops = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const auto* l = std::get_if<FusedConvLayer>(&g.layers()[i]);
    if (l == nullptr) continue;
    const double ops = static_cast<double>(g.output_shape(i).count()) *
                       static_cast<double>(l->geometry.window_len());
    if (ops > best_ops) {
      best_ops = ops;
      best = i;
    }
  }
  return best;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double BenchReport::layer_sum_ms() const noexcept {
  double sum = 0.0;
  for (const auto& l : layers) sum += l.median_ms;
  return sum;
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["threads"] = threads;
  j["repeats"] = repeats;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : layers) {
    j["layers"].push_back({{"name", l.name},
                           {"kind", l.kind},
                           {"output_shape", {l.output.n, l.output.h, l.output.w, l.output.c}},
                           {"median_ms", l.median_ms}});
  }
  j["layer_sum_ms"] = layer_sum_ms();
  j["total_ms"] = total_ms;
  j["throughput_ips"] = throughput;
  if (oracle) {
    j["oracle_comparison"] = {{"layer", oracle->layer},
                              {"runs", oracle->runs},
                              {"fused_ms", oracle->fused_ms},
                              {"oracle_ms", oracle->oracle_ms},
                              {"speedup", oracle->speedup()}};
  } else {
    j["oracle_comparison"] = nullptr;
  }
  return j.dump(2);
}

std::string BenchReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-14s %-22s %12s\n", "layer", "kind", "output (NHWC)",
                "median ms");
  os << line;
  for (const auto& l : layers) {
    std::snprintf(line, sizeof line, "%-10s %-14s %-22s %12.3f\n", l.name.c_str(), l.kind.c_str(),
                  l.output.to_string().c_str(), l.median_ms);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-48s %12.3f\n", "sum of layers", layer_sum_ms());
  os << line;
  std::snprintf(line, sizeof line, "%-48s %12.3f\n", "end-to-end (median)", total_ms);
  os << line;
  std::snprintf(line, sizeof line, "%-48s %12.2f\n", "throughput (inferences/s)", throughput);
  os << line;
  if (oracle) {
    std::snprintf(line, sizeof line,
                  "oracle check on %s: packed %.3f ms, double conv %.3f ms, speedup %.1fx (%zu runs)\n",
                  oracle->layer.c_str(), oracle->fused_ms, oracle->oracle_ms, oracle->speedup(),
                  oracle->runs);
    os << line;
  }
  return os.str();
}

OracleComparison compare_conv_with_oracle(const FusedConvLayer& layer, const Shape& input_shape,
                                          std::size_t runs, const Executor& exec,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<float> signs = zoo::random_signs(input_shape.count(), rng);
  std::vector<std::int8_t> s(signs.begin(), signs.end());
  const SignTensor input_signs(input_shape, std::move(s));
  const BitTensor packed = pack_channels(input_signs);
  const DoubleTensor real = oracle::to_real(input_signs);
  const std::vector<float> weights = [&] {
    const SignTensor w = unpack_channels(layer.weights);
    return std::vector<float>(w.data().begin(), w.data().end());
  }();

  std::vector<double> fused_times, oracle_times;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = Clock::now();
    const BitTensor out = fused_binary_conv(packed, layer, exec);
    const auto t1 = Clock::now();
    const DoubleTensor ref = oracle::conv(real, weights, layer.geometry);
    const auto t2 = Clock::now();
    fused_times.push_back(elapsed_ms(t0, t1));
    oracle_times.push_back(elapsed_ms(t1, t2));
    if (out.shape().count() != ref.size()) throw DimensionError("oracle comparison shape mismatch");
  }
  OracleComparison c;
  c.runs = runs;
  c.fused_ms = median(fused_times);
  c.oracle_ms = median(oracle_times);
  return c;
}

BenchReport bench_model(const NetworkGraph& graph, std::size_t repeats, const Executor& exec,
                        bool compare_oracle, std::string model_name) {
  if (repeats < 3) throw InvalidParameterError("bench needs at least 3 repeats");
  BenchReport report;
  report.model = std::move(model_name);
  report.threads = exec.threads();
  report.repeats = repeats;

  std::mt19937_64 rng(0);
  const ByteTensor img = zoo::random_image(graph.input_shape(), rng);
  (void)infer(graph, img, exec);  // warmup

  std::vector<std::vector<double>> per_layer(graph.size());
  std::vector<double> totals;
  for (std::size_t r = 0; r < repeats; ++r) {
    const InferResult res = infer(graph, img, exec);
    for (std::size_t i = 0; i < graph.size(); ++i) per_layer[i].push_back(res.layer_ms[i]);
    totals.push_back(res.total_ms);
  }
  for (std::size_t i = 0; i < graph.size(); ++i) {
    report.layers.push_back(LayerTiming{graph.layer_name(i),
                                        std::string(layer_kind_name(graph.layers()[i])),
                                        graph.output_shape(i), median(per_layer[i])});
  }
  report.total_ms = median(totals);
  report.throughput = report.total_ms > 0.0 ? 1000.0 / report.total_ms : 0.0;

  if (compare_oracle) {
    if (const auto idx = heaviest_conv(graph)) {
      const auto& layer = std::get<FusedConvLayer>(graph.layers()[*idx]);
      OracleComparison c =
          compare_conv_with_oracle(layer, graph.output_shape(*idx - 1), repeats, exec);
      c.layer = graph.layer_name(*idx);
      report.oracle = c;
    }
  }
  return report;
}

}  // namespace bnn
