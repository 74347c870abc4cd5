#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bnn/executor.hpp"
#include "bnn/graph.hpp"

namespace bnn {

struct Mismatch {
  std::size_t trial = 0;
  std::size_t layer = 0;
  std::string layer_name;
  std::size_t element = 0;  // flat NHWC index
  double engine = 0.0;
  double oracle = 0.0;
};

struct VerifyReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::size_t elements_compared = 0;
  std::optional<Mismatch> mismatch;

  bool ok() const noexcept { return !mismatch.has_value(); }
  std::string to_string() const;
};

/// Feeds `trials` random images (drawn from `seed`) through the packed
/// engine and the oracle, comparing every layer's output exactly. Stops at
/// the first differing element.
VerifyReport verify_model(const NetworkGraph& graph, std::size_t trials, std::uint64_t seed,
                          const Executor& exec = serial_executor());

struct LayerTiming {
  std::string name;
  std::string kind;
  Shape output;
  double median_ms = 0.0;
};

/// Paired timing of one packed conv layer against the double-precision
/// oracle convolution of the same shape.
struct OracleComparison {
  std::string layer;
  std::size_t runs = 0;
  double fused_ms = 0.0;
  double oracle_ms = 0.0;
  double speedup() const noexcept { return fused_ms > 0.0 ? oracle_ms / fused_ms : 0.0; }
};

struct BenchReport {
  std::string model;
  std::size_t threads = 1;
  std::size_t repeats = 0;
  std::vector<LayerTiming> layers;
  double total_ms = 0.0;  // median end-to-end
  double throughput = 0.0;  // inferences per second
  std::optional<OracleComparison> oracle;

  double layer_sum_ms() const noexcept;
  std::string to_json() const;
  std::string to_table() const;
};

/// One warmup run, then `repeats` timed runs (repeats >= 3). Per-layer and
/// total times are medians. With compare_oracle, the heaviest packed conv is
/// also timed against the oracle convolution.
BenchReport bench_model(const NetworkGraph& graph, std::size_t repeats, const Executor& exec,
                        bool compare_oracle = true, std::string model_name = {});

/// Median-of-`runs` timing of fused_binary_conv vs oracle::conv on a random
/// input of `input_shape`.
OracleComparison compare_conv_with_oracle(const FusedConvLayer& layer, const Shape& input_shape,
                                          std::size_t runs, const Executor& exec,
                                          std::uint64_t seed = 7);

double median(std::vector<double> values);

}  // namespace bnn
