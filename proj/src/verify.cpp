#include <bit>
#include <random>
#include <sstream>

#include "bnn/harness.hpp"
#include "bnn/oracle.hpp"
#include "bnn/zoo.hpp"

namespace bnn {
namespace {

std::optional<Mismatch> compare_stage(const Activation& engine, const oracle::Activation& ref) {
  Mismatch m;
  if (const auto* bits = std::get_if<BitTensor>(&engine)) {
    const auto* signs = std::get_if<SignTensor>(&ref);
    if (signs == nullptr || signs->shape() != bits->shape()) return m;
    const SignTensor mine = unpack_channels(*bits);
    const auto a = mine.data();
    const auto b = signs->data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) {
        m.element = i;
        m.engine = a[i];
        m.oracle = b[i];
        return m;
      }
    }
    return std::nullopt;
  }
  const auto& real = std::get<FloatTensor>(engine);
  const auto* ref_real = std::get_if<FloatTensor>(&ref);
  if (ref_real == nullptr || ref_real->shape() != real.shape()) return m;
  const auto a = real.data();
  const auto b = ref_real->data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) {
      m.element = i;
      m.engine = a[i];
      m.oracle = b[i];
      return m;
    }
  }
  return std::nullopt;
}

std::size_t stage_size(const Activation& a) {
  if (const auto* bits = std::get_if<BitTensor>(&a)) return bits->shape().count();
  return std::get<FloatTensor>(a).size();
}

}  // namespace

std::string VerifyReport::to_string() const {
  std::ostringstream os;
  if (ok()) {
    os << "OK: " << trials << " trial(s), seed " << seed << ", " << elements_compared
       << " elements bit-exact against the oracle";
  } else {
    const Mismatch& m = *mismatch;
    os << "MISMATCH: trial " << m.trial << ", layer " << m.layer << " (" << m.layer_name
       << "), element " << m.element << ": engine " << m.engine << ", oracle " << m.oracle
       << " (seed " << seed << ")";
  }
  return os.str();
}

VerifyReport verify_model(const NetworkGraph& graph, std::size_t trials, std::uint64_t seed,
                          const Executor& exec) {
  VerifyReport report;
  report.seed = seed;
  const oracle::OracleNet reference = oracle::OracleNet::from_graph(graph);
  std::mt19937_64 rng(seed);

  for (std::size_t t = 0; t < trials; ++t) {
    const ByteTensor img = zoo::random_image(graph.input_shape(), rng);
    const auto engine = infer_trace(graph, img, exec);
    const auto ref = reference.run_trace(img);
    report.trials = t + 1;
    const std::size_t stages = std::min(engine.size(), ref.size());
    for (std::size_t i = 0; i < stages; ++i) {
      if (auto m = compare_stage(engine[i], ref[i])) {
        m->trial = t;
        m->layer = i;
        m->layer_name = graph.layer_name(i);
        report.mismatch = *m;
        return report;
      }
      report.elements_compared += stage_size(engine[i]);
    }
    if (engine.size() != ref.size()) {
      Mismatch m;
      m.trial = t;
      m.layer = stages;
      m.layer_name = stages < graph.size() ? graph.layer_name(stages) : "<end>";
      report.mismatch = m;
      return report;
    }
  }
  return report;
}

}  // namespace bnn
