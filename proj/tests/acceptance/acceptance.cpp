// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bnn/cli.hpp"
#include "bnn/harness.hpp"
#include "bnn/kernels.hpp"
#include "bnn/model_io.hpp"
#include "bnn/oracle.hpp"
#include "bnn/zoo.hpp"
#include "test_util.hpp"

using namespace bnn;

namespace {

using Clock = std::chrono::steady_clock;

struct Result {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Result binary_dot_matches_sign_oracle() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> len_dist(1, 4096);
  std::bernoulli_distribution coin(0.5);
  const auto t0 = Clock::now();
  std::size_t mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t len = len_dist(rng);
    std::vector<int> a(len), b(len);
    std::vector<std::uint64_t> wa(words_for_bits<std::uint64_t>(len)), wb(wa.size());
    for (std::size_t k = 0; k < len; ++k) {
      a[k] = coin(rng);
      b[k] = coin(rng);
      if (a[k]) wa[k / 64] |= std::uint64_t{1} << (k % 64);
      if (b[k]) wb[k / 64] |= std::uint64_t{1} << (k % 64);
    }
    double ref = 0.0;
    for (std::size_t k = 0; k < len; ++k) ref += (a[k] ? 1.0 : -1.0) * (b[k] ? 1.0 : -1.0);
    const auto d = binary_dot(PackedVectorView<>(wa, len), PackedVectorView<>(wb, len));
    if (static_cast<double>(d) != ref) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          fmt("10000 pairs, %zu mismatches, %.2f s (limit 5 s)", mismatches, secs)};
}

Result bitplane_first_layer_exact() {
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<std::size_t> hw(3, 16), ch(1, 3), k(1, 3), s(1, 2), oc(1, 20);
  std::size_t elements = 0, mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const Shape shape{1, hw(rng), hw(rng), ch(rng)};
    const std::size_t kernel = 2 * k(rng) - 1;  // 1, 3 or 5
    const std::size_t pad = std::uniform_int_distribution<std::size_t>(0, kernel / 2)(rng);
    ConvGeometry g{kernel, kernel, s(rng), s(rng), pad, pad, shape.c, oc(rng)};
    if (shape.h + 2 * pad < kernel || shape.w + 2 * pad < kernel) g.kernel_h = g.kernel_w = 1;
    const ByteTensor img = test::random_bytes(shape, rng);
    const auto w = test::random_weight_values(g.weight_shape().count(), rng);
    Shape out_shape;
    const auto expected = test::integer_conv(img, w, g, out_shape);
    const AccumTensor got = bitplane_conv_accumulate(img, pack_weights(g, w), g);
    for (std::size_t e = 0; e < expected.size(); ++e) mismatches += got.data()[e] != expected[e];
    elements += expected.size();
  }
  return {mismatches == 0 && elements > 0,
          fmt("200 images up to 16x16x3, %zu elements, %zu mismatches (exact)", elements, mismatches)};
}

Result fused_layers_match_oracle() {
  std::mt19937_64 rng(1003);
  std::uniform_int_distribution<std::size_t> in_c(1, 320), out_c(1, 40), hw(3, 9), kk(0, 2);
  // [gamma>0 & x1>=xi -> 1, gamma>0 & x1<xi -> 0, gamma<0 & x1<=xi -> 1, gamma<0 & x1>xi -> 0]
  std::size_t cases[4] = {0, 0, 0, 0};
  std::size_t ties_pos = 0, ties_neg = 0, bad_layers = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t kernel = 2 * kk(rng) + 1;
    const std::size_t stride = 1 + static_cast<std::size_t>(i % 2);
    const ConvGeometry g{kernel, kernel, stride, 1, kernel / 2, kernel / 2, in_c(rng), out_c(rng)};
    const SignTensor x = test::random_signs(Shape{1, hw(rng), hw(rng), g.in_channels}, rng);
    const auto mode = static_cast<test::Ties>(i % 3);
    std::vector<float> w;
    test::RandomLayer l = test::random_layer(g, rng, test::Ties::none, nullptr, &w);
    if (mode != test::Ties::none) {
      const DoubleTensor acc = oracle::conv(oracle::to_real(x), w, g);
      l = test::random_layer(g, rng, mode, &acc);
      l.conv.weights = w;
    }
    const FusedConvLayer layer = fuse(l.conv, l.bn, RawLayerSpec::make_binarize());
    const BitTensor packed = pack_channels(x);
    const BitTensor out = fused_binary_conv(packed, layer);
    if (!(unpack_channels(out) == test::oracle_binarized_conv(x, l))) ++bad_layers;

    const AccumTensor x1 = binary_conv_accumulate(packed, layer.weights, g);
    for (std::size_t e = 0; e < x1.size(); ++e) {
      const std::size_t c = e % g.out_channels;
      const double v = x1.data()[e];
      const double xi = layer.xi[c];
      if (layer.gamma_positive[c]) {
        ++cases[v >= xi ? 0 : 1];
        ties_pos += v == xi;
      } else {
        ++cases[v <= xi ? 2 : 3];
        ties_neg += v == xi;
      }
    }
  }
  const bool all_cases = cases[0] && cases[1] && cases[2] && cases[3];
  return {bad_layers == 0 && all_cases && ties_pos > 0 && ties_neg > 0,
          fmt("500 layers, %zu mismatching; case counts %zu/%zu/%zu/%zu; ties gamma>0 %zu, gamma<0 %zu",
              bad_layers, cases[0], cases[1], cases[2], cases[3], ties_pos, ties_neg)};
}

Result branchless_rule_matches_cases() {
  int agree = 0;
  for (const std::int64_t x1 : {2, 3, 4}) {
    for (const bool gpos : {true, false}) {
      agree += threshold_bit(x1, 3.0, gpos) == oracle::threshold_cases(static_cast<double>(x1), 3.0, gpos);
    }
  }
  return {agree == 6, fmt("%d/6 combinations agree", agree)};
}

Result threshold_algebra() {
  std::mt19937_64 rng(1005);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.05, 4.0);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  std::size_t failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const float gamma = static_cast<float>((coin(rng) ? 1 : -1) * mag(rng));
    const float beta = static_cast<float>(normal(rng));
    const float mean = static_cast<float>(20.0 * normal(rng));
    const float sigma = static_cast<float>(5.0 * mag(rng));
    const float b = static_cast<float>(normal(rng));
    const double x1 = std::round(30.0 * normal(rng));
    const std::vector<float> bias = {b};
    const BatchNormParams bn{{gamma}, {beta}, {mean}, {sigma}};
    const double xi = compute_thresholds(bias, bn).xi[0];
    const double lhs = double{gamma} / sigma * (x1 - xi);
    const double rhs = double{gamma} * (x1 + b - mean) / sigma + beta;
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    const double rel = scale == 0.0 ? 0.0 : std::abs(lhs - rhs) / scale;
    worst = std::max(worst, rel);
    failures += rel > 1e-5;
  }
  return {failures == 0, fmt("10000 draws, worst relative error %.3g (limit 1e-5)", worst)};
}

Result schedules_agree() {
  std::mt19937_64 rng(1006);
  std::uniform_int_distribution<std::size_t> in_c(64, 512), out_c(1, 48), hw(2, 7);
  std::size_t integrated = 0, separate = 0, differing = 0;
  for (int i = 0; i < 100; ++i) {
    const ConvGeometry g{3, 3, 1, 1, 1, 1, in_c(rng), out_c(rng)};
    const test::RandomLayer l = test::random_layer(g, rng, test::Ties::none);
    const FusedConvLayer layer = fuse(l.conv, l.bn, RawLayerSpec::make_binarize());
    (layer.pack_integrated ? integrated : separate)++;
    if (layer.pack_integrated != (g.in_channels <= 256)) ++differing;
    const BitTensor x = pack_channels(test::random_signs(Shape{1, hw(rng), hw(rng), g.in_channels}, rng));
    if (!(fused_binary_conv(x, layer, ConvPlan{true, 8}) == fused_binary_conv(x, layer, ConvPlan{false, 8}))) {
      ++differing;
    }
  }
  return {differing == 0 && integrated > 0 && separate > 0,
          fmt("100 layers (%zu scheduled integrated, %zu separate), %zu differing", integrated, separate,
              differing)};
}

class CountingBuf : public std::streambuf {
 public:
  std::uint64_t count = 0;

 protected:
  int_type overflow(int_type ch) override {
    ++count;
    return ch;
  }
  std::streamsize xsputn(const char*, std::streamsize n) override {
    count += static_cast<std::uint64_t>(n);
    return n;
  }
};

Result compression_ratio() {
  const zoo::Topology t = zoo::vgg16(224);
  CountingBuf buf;
  std::ostream os(&buf);
  const std::uint64_t float_bytes = oracle::write_float32_model(t.specs, os);
  const NetworkGraph g = build(t.specs, t.input);
  const std::size_t packed_bytes = serialize_model(g).size();
  const double ratio = static_cast<double>(float_bytes) / static_cast<double>(packed_bytes);
  return {ratio >= 15.0, fmt("VGG16 at 224x224: float32 %.1f MB, packed %.1f MB, ratio %.2fx (need >= 15x)",
                             float_bytes / 1e6, packed_bytes / 1e6, ratio)};
}

Result packed_conv_speedup() {
  std::mt19937_64 rng(1008);
  const ConvGeometry g{3, 3, 1, 1, 1, 1, 256, 256};
  const test::RandomLayer l = test::random_layer(g, rng, test::Ties::none);
  const FusedConvLayer layer = fuse(l.conv, l.bn, RawLayerSpec::make_binarize());
  const auto t0 = Clock::now();
  const OracleComparison c = compare_conv_with_oracle(layer, Shape{1, 32, 32, 256}, 5, serial_executor());
  const double secs = seconds_since(t0);
  return {c.speedup() >= 4.0 && secs < 60.0,
          fmt("256->256 3x3 on 32x32, median of %zu: packed %.2f ms, double %.2f ms, speedup %.1fx "
              "(need >= 4x), %.1f s (limit 60 s)",
              c.runs, c.fused_ms, c.oracle_ms, c.speedup(), secs)};
}

Result verify_fixtures() {
  std::string detail;
  bool pass = true;
  for (const auto& t : {zoo::alexnet(), zoo::vgg16(), zoo::yolov2_tiny()}) {
    const auto path = test::temp_path("acceptance_" + t.name + ".pbit");
    save_model(build(t.specs, t.input), path);
    cli::VerifyOptions opts;
    opts.model = path;
    opts.trials = 20;
    opts.seed = 2024;
    std::ostringstream out, err;
    const int code = cli::cmd_verify(opts, out, err);
    pass &= code == 0;
    detail += (detail.empty() ? "" : ", ") + t.name + " exit " + std::to_string(code);
    if (code != 0) detail += " (" + err.str() + ")";
  }
  return {pass, detail + " (20 trials each)"};
}

Result serialization_round_trip() {
  std::size_t stable = 0, rejected = 0, corruptions = 0;
  const std::vector<zoo::Topology> fixtures = {zoo::tiny(), zoo::yolov2_tiny(), zoo::alexnet(), zoo::vgg16()};
  std::mt19937_64 rng(1010);
  for (const auto& t : fixtures) {
    const auto path = test::temp_path("acceptance_rt_" + t.name + ".pbit");
    const auto first = save_model(build(t.specs, t.input), path);
    const auto second = serialize_model(load_model(path));
    stable += first == second;

    std::vector<std::vector<std::uint8_t>> bad;
    auto flipped = first;
    flipped[std::uniform_int_distribution<std::size_t>(kModelHeaderSize, first.size() - 1)(rng)] ^= 0x10;
    bad.push_back(flipped);
    bad.emplace_back(first.begin(), first.end() - 7);
    auto magic = first;
    magic[1] = 'X';
    bad.push_back(magic);
    for (const auto& b : bad) {
      ++corruptions;
      try {
        (void)deserialize_model(b);
      } catch (const FormatError&) {
        ++rejected;
      }
    }
  }
  return {stable == fixtures.size() && rejected == corruptions,
          fmt("%zu/%zu fixtures byte-identical after save-load-save, %zu/%zu corrupted files rejected",
              stable, fixtures.size(), rejected, corruptions)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> checks = {
      {"binary dot product equals +/-1 dot product", binary_dot_matches_sign_oracle},
      {"bit-plane first layer equals integer convolution", bitplane_first_layer_exact},
      {"fused conv equals conv-bias-batchnorm-sign pipeline", fused_layers_match_oracle},
      {"branchless threshold equals four-case rule", branchless_rule_matches_cases},
      {"threshold form equals batch-norm form", threshold_algebra},
      {"integrated and separate packing plans agree", schedules_agree},
      {"packed model compression", compression_ratio},
      {"packed conv speed vs double-precision conv", packed_conv_speedup},
      {"verify exits 0 on benchmark-shaped models", verify_fixtures},
      {"serialization round trip and corruption rejection", serialization_round_trip},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Result r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", r.pass ? "PASS" : "FAIL", name.c_str(), r.detail.c_str());
    std::fflush(stdout);
    failed += !r.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
