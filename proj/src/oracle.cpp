#include "bnn/oracle.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace bnn::oracle {
namespace {

std::size_t out_extent(std::size_t in, std::size_t pad, std::size_t kernel, std::size_t stride) {
  if (in + 2 * pad < kernel) throw DimensionError("oracle: kernel larger than padded input");
  return (in + 2 * pad - kernel) / stride + 1;
}

DoubleTensor flatten(const DoubleTensor& x) {
  const Shape& s = x.shape();
  return DoubleTensor(Shape{s.n, 1, 1, s.h * s.w * s.c},
                      std::vector<double>(x.data().begin(), x.data().end()));
}

double bn_value(double x2, std::size_t c, const BatchNormParams& bn) {
  return static_cast<double>(bn.gamma[c]) * (x2 - static_cast<double>(bn.mean[c])) /
             static_cast<double>(bn.sigma[c]) +
         static_cast<double>(bn.beta[c]);
}

void check_bn(const BatchNormParams& bn, std::size_t channels) {
  if (bn.gamma.size() != channels || bn.beta.size() != channels || bn.mean.size() != channels ||
      bn.sigma.size() != channels) {
    throw DimensionError("oracle: batch-norm arrays do not match channel count");
  }
  for (const float s : bn.sigma) {
    if (!(s > 0.0f)) throw InvalidParameterError("oracle: sigma must be > 0");
  }
}

}  // namespace

DoubleTensor to_real(const ByteTensor& t) {
  return DoubleTensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

DoubleTensor to_real(const SignTensor& t) {
  return DoubleTensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

DoubleTensor conv(const DoubleTensor& input, std::span<const float> weights, const ConvGeometry& g) {
  const Shape& in = input.shape();
  if (in.c != g.in_channels) throw DimensionError("oracle conv: channel mismatch");
  if (weights.size() != g.out_channels * g.kernel_h * g.kernel_w * g.in_channels) {
    throw DimensionError("oracle conv: weight count mismatch");
  }
  const Shape out{in.n, out_extent(in.h, g.pad_h, g.kernel_h, g.stride_h),
                  out_extent(in.w, g.pad_w, g.kernel_w, g.stride_w), g.out_channels};
  std::vector<double> result(out.count(), 0.0);
  const auto x = input.data();

  for (std::size_t n = 0; n < out.n; ++n) {
    for (std::size_t oy = 0; oy < out.h; ++oy) {
      for (std::size_t ox = 0; ox < out.w; ++ox) {
        for (std::size_t oc = 0; oc < out.c; ++oc) {
          double sum = 0.0;
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const long iy = static_cast<long>(oy * g.stride_h + ky) - static_cast<long>(g.pad_h);
            if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long ix = static_cast<long>(ox * g.stride_w + kx) - static_cast<long>(g.pad_w);
              if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
              const double* px =
                  x.data() + ((n * in.h + static_cast<std::size_t>(iy)) * in.w + static_cast<std::size_t>(ix)) * in.c;
              const float* pw = weights.data() + ((oc * g.kernel_h + ky) * g.kernel_w + kx) * in.c;
              for (std::size_t ic = 0; ic < in.c; ++ic) sum += px[ic] * static_cast<double>(pw[ic]);
            }
          }
          result[((n * out.h + oy) * out.w + ox) * out.c + oc] = sum;
        }
      }
    }
  }
  return DoubleTensor(out, std::move(result));
}

DoubleTensor affine(const DoubleTensor& x, std::span<const float> bias,
                    const std::optional<BatchNormParams>& bn) {
  const Shape& s = x.shape();
  if (!bias.empty() && bias.size() != s.c) throw DimensionError("oracle: bias length mismatch");
  if (bn) check_bn(*bn, s.c);
  std::vector<double> out(s.count());
  const auto d = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t c = i % s.c;
    const double x2 = d[i] + (bias.empty() ? 0.0 : static_cast<double>(bias[c]));
    out[i] = bn ? bn_value(x2, c, *bn) : x2;
  }
  return DoubleTensor(s, std::move(out));
}

SignTensor sign(const DoubleTensor& x) {
  std::vector<std::int8_t> out(x.size());
  const auto d = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = d[i] >= 0.0 ? 1 : -1;
  return SignTensor(x.shape(), std::move(out));
}

SignTensor bn_sign(const DoubleTensor& x, std::span<const float> bias, const BatchNormParams& bn) {
  return sign(affine(x, bias, bn));
}

SignTensor maxpool(const SignTensor& x, const PoolGeometry& g) {
  const Shape& in = x.shape();
  const Shape out{in.n, (in.h + g.stride_h - 1) / g.stride_h, (in.w + g.stride_w - 1) / g.stride_w,
                  in.c};
  std::vector<std::int8_t> result(out.count());
  for (std::size_t n = 0; n < out.n; ++n) {
    for (std::size_t oy = 0; oy < out.h; ++oy) {
      for (std::size_t ox = 0; ox < out.w; ++ox) {
        for (std::size_t c = 0; c < out.c; ++c) {
          int best = -2;
          for (std::size_t ky = 0; ky < g.window_h; ++ky) {
            for (std::size_t kx = 0; kx < g.window_w; ++kx) {
              const std::size_t iy = oy * g.stride_h + ky;
              const std::size_t ix = ox * g.stride_w + kx;
              if (iy >= in.h || ix >= in.w) continue;
              best = std::max<int>(best, x.at(n, iy, ix, c));
            }
          }
          result[((n * out.h + oy) * out.w + ox) * out.c + c] = static_cast<std::int8_t>(best);
        }
      }
    }
  }
  return SignTensor(out, std::move(result));
}

bool threshold_cases(double x1, double xi, bool gamma_positive) {
  if (gamma_positive) {
    if (x1 >= xi) return true;
    return false;
  }
  if (x1 <= xi) return true;
  return false;
}

OracleNet::OracleNet(std::vector<RawLayerSpec> specs, Shape input_shape)
    : specs_(std::move(specs)), input_shape_(input_shape) {}

OracleNet OracleNet::from_graph(const NetworkGraph& graph) {
  return OracleNet(export_specs(graph), graph.input_shape());
}

std::vector<Activation> OracleNet::run_trace(const ByteTensor& img) const {
  if (img.shape() != input_shape_) throw DimensionError("oracle: input shape mismatch");
  std::vector<Activation> trace;
  DoubleTensor x = to_real(img);
  bool binary = false;  // x currently holds +/-1 values

  for (const RawLayerSpec& spec : specs_) {
    switch (spec.kind) {
      case LayerKind::conv:
      case LayerKind::output_conv:
        x = affine(conv(x, spec.weights, spec.conv), spec.bias, std::nullopt);
        binary = false;
        break;
      case LayerKind::dense:
        x = affine(conv(flatten(x), spec.weights, spec.conv), spec.bias, std::nullopt);
        binary = false;
        break;
      case LayerKind::batchnorm:
        x = affine(x, {}, spec.bn);
        binary = false;
        break;
      case LayerKind::binarize: {
        SignTensor s = sign(x);
        x = to_real(s);
        binary = true;
        trace.emplace_back(std::move(s));
        break;
      }
      case LayerKind::pool: {
        if (!binary) throw GraphError("oracle: pooling expects binarized input");
        std::vector<std::int8_t> signs(x.data().begin(), x.data().end());
        SignTensor pooled = maxpool(SignTensor(x.shape(), std::move(signs)), spec.pool);
        x = to_real(pooled);
        trace.emplace_back(std::move(pooled));
        break;
      }
    }
  }
  if (binary) throw GraphError("oracle: network must end in a real-valued layer");
  std::vector<float> out(x.data().begin(), x.data().end());
  trace.emplace_back(FloatTensor(x.shape(), std::move(out)));
  return trace;
}

FloatTensor OracleNet::run(const ByteTensor& img) const {
  auto trace = run_trace(img);
  return std::get<FloatTensor>(std::move(trace.back()));
}

std::uint64_t write_float32_model(const std::vector<RawLayerSpec>& specs, std::ostream& out) {
  std::uint64_t written = 0;
  auto u32 = [&](std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
    out.write(b, 4);
    written += 4;
  };
  auto floats = [&](const std::vector<float>& v) {
    for (const float f : v) u32(std::bit_cast<std::uint32_t>(f));
  };
  out.write("PF32", 4);
  written += 4;
  u32(static_cast<std::uint32_t>(specs.size()));
  for (const RawLayerSpec& s : specs) {
    u32(static_cast<std::uint32_t>(s.kind));
    for (const std::size_t v : {s.conv.kernel_h, s.conv.kernel_w, s.conv.stride_h, s.conv.stride_w,
                                s.conv.pad_h, s.conv.pad_w, s.conv.in_channels, s.conv.out_channels}) {
      u32(static_cast<std::uint32_t>(v));
    }
    u32(static_cast<std::uint32_t>(s.weights.size()));
    floats(s.weights);
    u32(static_cast<std::uint32_t>(s.bias.size()));
    floats(s.bias);
    u32(static_cast<std::uint32_t>(s.bn.channels()));
    floats(s.bn.gamma);
    floats(s.bn.beta);
    floats(s.bn.mean);
    floats(s.bn.sigma);
  }
  if (!out) throw IoError("failed writing float32 model");
  return written;
}

}  // namespace bnn::oracle
