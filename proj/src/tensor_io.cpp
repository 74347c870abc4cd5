#include "bnn/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "bnn/model_io.hpp"

namespace bnn {
namespace {

constexpr std::size_t kHeader = 20;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> header(const char* magic, const Shape& s) {
  std::vector<std::uint8_t> out(magic, magic + 4);
  for (const std::size_t d : {s.n, s.h, s.w, s.c}) {
    if (d > 0xFFFFFFFFu) throw FormatError("tensor extent does not fit the file header");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  return out;
}

Shape parse_header(std::span<const std::uint8_t> bytes, const char* magic, std::size_t elem_size) {
  if (bytes.size() < kHeader) throw FormatError("tensor file truncated (no header)");
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw FormatError(std::string("bad tensor magic, expected ") + std::string(magic, 4));
  }
  Shape s{get_u32(bytes, 4), get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
  try {
    s.validate();
  } catch (const DimensionError& e) {
    throw FormatError(std::string("bad tensor header: ") + e.what());
  }
  if ((bytes.size() - kHeader) / elem_size != s.count() || (bytes.size() - kHeader) % elem_size != 0) {
    throw FormatError("tensor payload does not match header shape " + s.to_string());
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_image(const ByteTensor& img) {
  auto out = header("PBIM", img.shape());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

ByteTensor decode_image(std::span<const std::uint8_t> bytes) {
  const Shape s = parse_header(bytes, "PBIM", 1);
  const auto body = bytes.subspan(kHeader);
  return ByteTensor(s, std::vector<std::uint8_t>(body.begin(), body.end()));
}

std::vector<std::uint8_t> encode_float_tensor(const FloatTensor& t) {
  auto out = header("PBFT", t.shape());
  out.reserve(out.size() + t.size() * 4);
  for (const float f : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FloatTensor decode_float_tensor(std::span<const std::uint8_t> bytes) {
  const Shape s = parse_header(bytes, "PBFT", 4);
  std::vector<float> data(s.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kHeader + 4 * i));
  }
  try {
    return FloatTensor(s, std::move(data));
  } catch (const InvalidValueError& e) {
    throw FormatError(e.what());
  }
}

void save_image(const ByteTensor& img, const std::filesystem::path& path) {
  write_file(path, encode_image(img));
}

ByteTensor load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

void save_float_tensor(const FloatTensor& t, const std::filesystem::path& path) {
  write_file(path, encode_float_tensor(t));
}

FloatTensor load_float_tensor(const std::filesystem::path& path) {
  return decode_float_tensor(read_file(path));
}

}  // namespace bnn
