#include "bnn/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
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

constexpr std::uint32_t kFlagBatchNorm = 1u;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void size(std::size_t v) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
      throw FormatError("value " + std::to_string(v) + " does not fit the model format");
    }
    u32(static_cast<std::uint32_t>(v));
  }
  void floats(const std::vector<float>& v) {
    for (const float f : v) f32(f);
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<float> floats(std::size_t n) {
    need(n * 4);
    std::vector<float> v(n);
    for (auto& f : v) f = f32();
    return v;
  }
  std::vector<std::uint64_t> words(std::uint64_t n) {
    if (n > remaining() / 8) throw FormatError("model file truncated");
    std::vector<std::uint64_t> v(n);
    for (auto& w : v) w = u64();
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw FormatError("model file truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_geometry(Writer& w, const ConvGeometry& g) {
  for (const std::size_t v : {g.kernel_h, g.kernel_w, g.stride_h, g.stride_w, g.pad_h, g.pad_w,
                              g.in_channels, g.out_channels}) {
    w.size(v);
  }
}

ConvGeometry read_geometry(Reader& r) {
  ConvGeometry g;
  g.kernel_h = r.u32();
  g.kernel_w = r.u32();
  g.stride_h = r.u32();
  g.stride_w = r.u32();
  g.pad_h = r.u32();
  g.pad_w = r.u32();
  g.in_channels = r.u32();
  g.out_channels = r.u32();
  return g;
}

void write_weights(Writer& w, const BitTensor& t) {
  const auto words = t.words();
  w.u64(words.size());
  for (const std::uint64_t word : words) w.u64(word);
}

BitTensor read_weights(Reader& r, const ConvGeometry& g) {
  const std::uint64_t count = r.u64();
  auto words = r.words(count);
  return BitTensor(g.weight_shape(), std::move(words));
}

void write_bn(Writer& w, const BatchNormParams& bn) {
  w.floats(bn.gamma);
  w.floats(bn.beta);
  w.floats(bn.mean);
  w.floats(bn.sigma);
}

BatchNormParams read_bn(Reader& r, std::size_t channels) {
  BatchNormParams bn;
  bn.gamma = r.floats(channels);
  bn.beta = r.floats(channels);
  bn.mean = r.floats(channels);
  bn.sigma = r.floats(channels);
  return bn;
}

void write_conv_body(Writer& w, const ConvGeometry& g, const BitTensor& weights,
                     const std::vector<float>& bias, const BatchNormParams* bn) {
  write_geometry(w, g);
  write_weights(w, weights);
  w.size(bias.size());
  w.floats(bias);
  if (bn) write_bn(w, *bn);
}

struct ConvBody {
  ConvGeometry geometry;
  BitTensor weights;
  std::vector<float> bias;
  std::optional<BatchNormParams> bn;
};

ConvBody read_conv_body(Reader& r, bool has_bn) {
  ConvBody body;
  body.geometry = read_geometry(r);
  body.geometry.validate();
  body.weights = read_weights(r, body.geometry);
  const std::uint32_t bias_count = r.u32();
  if (bias_count != 0 && bias_count != body.geometry.out_channels) {
    throw FormatError("bias count " + std::to_string(bias_count) + " does not match out_channels");
  }
  body.bias = r.floats(bias_count);
  if (has_bn) body.bn = read_bn(r, body.geometry.out_channels);
  return body;
}

FusedConvLayer make_fused(ConvBody body, const BuildOptions& options) {
  if (!body.bn) throw FormatError("binarized layer record without batch-norm parameters");
  ChannelThresholds t = compute_thresholds(body.bias, *body.bn);
  FusedConvLayer l;
  l.geometry = body.geometry;
  l.weights = std::move(body.weights);
  l.xi = std::move(t.xi);
  l.gamma_positive = std::move(t.gamma_positive);
  l.pack_integrated = schedule_conv(l.geometry, options.integrate_channel_limit).pack_integrated;
  l.bias = std::move(body.bias);
  l.bn = std::move(*body.bn);
  return l;
}

Layer read_layer(Reader& r, const BuildOptions& options) {
  const std::uint32_t tag = r.u32();
  const std::uint32_t flags = r.u32();
  const bool has_bn = (flags & kFlagBatchNorm) != 0;
  switch (static_cast<RecordKind>(tag)) {
    case RecordKind::first_conv: {
      FusedConvLayer f = make_fused(read_conv_body(r, has_bn), options);
      return FirstConvLayer{f.geometry, std::move(f.weights), std::move(f.xi),
                            std::move(f.gamma_positive), std::move(f.bias), std::move(f.bn)};
    }
    case RecordKind::fused_conv:
      return make_fused(read_conv_body(r, has_bn), options);
    case RecordKind::dense:
      return BinaryDenseLayer{make_fused(read_conv_body(r, has_bn), options)};
    case RecordKind::maxpool: {
      PoolGeometry g;
      g.window_h = r.u32();
      g.window_w = r.u32();
      g.stride_h = r.u32();
      g.stride_w = r.u32();
      g.validate();
      return g;
    }
    case RecordKind::output_conv:
    case RecordKind::output_dense: {
      ConvBody body = read_conv_body(r, has_bn);
      OutputConvLayer l;
      l.geometry = body.geometry;
      l.weights = std::move(body.weights);
      l.bias = std::move(body.bias);
      l.bn = std::move(body.bn);
      l.flatten_input = static_cast<RecordKind>(tag) == RecordKind::output_dense;
      return l;
    }
  }
  throw FormatError("unknown layer record tag " + std::to_string(tag));
}

std::uint32_t checksum(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const NetworkGraph& graph) {
  Writer payload;
  for (const Layer& layer : graph.layers()) {
    std::visit(Overloaded{
                   [&](const FirstConvLayer& l) {
                     payload.u32(static_cast<std::uint32_t>(RecordKind::first_conv));
                     payload.u32(kFlagBatchNorm);
                     write_conv_body(payload, l.geometry, l.weights, l.bias, &l.bn);
                   },
                   [&](const FusedConvLayer& l) {
                     payload.u32(static_cast<std::uint32_t>(RecordKind::fused_conv));
                     payload.u32(kFlagBatchNorm);
                     write_conv_body(payload, l.geometry, l.weights, l.bias, &l.bn);
                   },
                   [&](const BinaryDenseLayer& d) {
                     payload.u32(static_cast<std::uint32_t>(RecordKind::dense));
                     payload.u32(kFlagBatchNorm);
                     write_conv_body(payload, d.layer.geometry, d.layer.weights, d.layer.bias,
                                     &d.layer.bn);
                   },
                   [&](const PoolGeometry& g) {
                     payload.u32(static_cast<std::uint32_t>(RecordKind::maxpool));
                     payload.u32(0);
                     for (const std::size_t v : {g.window_h, g.window_w, g.stride_h, g.stride_w}) {
                       payload.size(v);
                     }
                   },
                   [&](const OutputConvLayer& l) {
                     payload.u32(static_cast<std::uint32_t>(l.flatten_input ? RecordKind::output_dense
                                                                            : RecordKind::output_conv));
                     payload.u32(l.bn ? kFlagBatchNorm : 0);
                     write_conv_body(payload, l.geometry, l.weights, l.bias, l.bn ? &*l.bn : nullptr);
                   },
               },
               layer);
  }

  Writer out;
  for (const char ch : kModelMagic) out.bytes().push_back(static_cast<std::uint8_t>(ch));
  out.u32(kModelVersion);
  out.size(graph.size());
  const Shape& in = graph.input_shape();
  for (const std::size_t v : {in.n, in.h, in.w, in.c}) out.size(v);
  out.u32(checksum(payload.bytes()));
  out.u64(payload.bytes().size());
  auto& bytes = out.bytes();
  bytes.insert(bytes.end(), payload.bytes().begin(), payload.bytes().end());
  return bytes;
}

NetworkGraph deserialize_model(std::span<const std::uint8_t> bytes, const BuildOptions& options) {
  if (bytes.size() < kModelHeaderSize) throw FormatError("model file truncated (no header)");
  for (std::size_t i = 0; i < kModelMagic.size(); ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(kModelMagic[i])) {
      throw FormatError("bad magic: not a PBIT model file");
    }
  }
  Reader header(bytes.subspan(4, kModelHeaderSize - 4));
  const std::uint32_t version = header.u32();
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  const std::uint32_t layer_count = header.u32();
  Shape input;
  input.n = header.u32();
  input.h = header.u32();
  input.w = header.u32();
  input.c = header.u32();
  const std::uint32_t expected_crc = header.u32();
  const std::uint64_t payload_size = header.u64();

  const auto payload = bytes.subspan(kModelHeaderSize);
  if (payload.size() < payload_size) throw FormatError("model file truncated");
  if (payload.size() > payload_size) throw FormatError("trailing bytes after model payload");
  if (checksum(payload) != expected_crc) throw FormatError("model checksum mismatch");

  try {
    Reader r(payload);
    std::vector<Layer> layers;
    layers.reserve(layer_count);
    for (std::uint32_t i = 0; i < layer_count; ++i) layers.push_back(read_layer(r, options));
    if (r.remaining() != 0) throw FormatError("payload longer than its layer records");
    return NetworkGraph(input, std::move(layers));
  } catch (const PrunableChannelError&) {
    throw;
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
}

std::vector<std::uint8_t> save_model(const NetworkGraph& graph, const std::filesystem::path& path) {
  auto bytes = serialize_model(graph);
  write_file(path, bytes);
  return bytes;
}

NetworkGraph load_model(const std::filesystem::path& path, const BuildOptions& options) {
  const auto bytes = read_file(path);
  return deserialize_model(bytes, options);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace bnn
