#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bnn/tensor.hpp"

namespace bnn {

// Raw NHWC dumps with a 20-byte header: 4-byte magic, then n, h, w, c as
// little-endian u32. Images ("PBIM") carry one byte per element; float
// tensors ("PBFT") carry little-endian IEEE-754 binary32.

std::vector<std::uint8_t> encode_image(const ByteTensor& img);
ByteTensor decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_float_tensor(const FloatTensor& t);
FloatTensor decode_float_tensor(std::span<const std::uint8_t> bytes);

void save_image(const ByteTensor& img, const std::filesystem::path& path);
ByteTensor load_image(const std::filesystem::path& path);
void save_float_tensor(const FloatTensor& t, const std::filesystem::path& path);
FloatTensor load_float_tensor(const std::filesystem::path& path);

}  // namespace bnn
