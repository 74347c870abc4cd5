#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bnn/graph.hpp"

namespace bnn {

inline constexpr std::array<char, 4> kModelMagic = {'P', 'B', 'I', 'T'};
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::size_t kModelHeaderSize = 40;

/// Layer record tags as stored on disk.
enum class RecordKind : std::uint32_t {
  first_conv = 1,
  fused_conv = 2,
  dense = 3,
  maxpool = 4,
  output_conv = 5,
  output_dense = 6,
};

/// Deterministic little-endian encoding of a graph; see docs/model_format.md.
/// Thresholds are not stored: loading recomputes them from the raw bias and
/// batch-norm parameters.
std::vector<std::uint8_t> serialize_model(const NetworkGraph& graph);

/// Throws FormatError on bad magic, version, checksum, truncation or an
/// inconsistent layer chain; PrunableChannelError for a gamma == 0 channel.
NetworkGraph deserialize_model(std::span<const std::uint8_t> bytes, const BuildOptions& options = {});

/// Writes serialize_model(graph) to `path` and returns the bytes written.
std::vector<std::uint8_t> save_model(const NetworkGraph& graph, const std::filesystem::path& path);

NetworkGraph load_model(const std::filesystem::path& path, const BuildOptions& options = {});

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace bnn
