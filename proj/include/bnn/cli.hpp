#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

#include "bnn/graph.hpp"

namespace bnn::cli {

struct RunOptions {
  std::filesystem::path model;
  std::filesystem::path input;
  std::filesystem::path output;
  std::size_t threads = 0;  // 0: all cores
};

struct VerifyOptions {
  std::filesystem::path model;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct BenchOptions {
  std::filesystem::path model;
  std::size_t repeats = 5;
  std::size_t threads = 0;  // 0: all cores
  bool json = false;
  bool oracle_check = true;
};

struct GenerateOptions {
  std::string topology = "tiny";
  std::size_t input_size = 0;  // 0: topology default
  std::uint64_t seed = 1;
  std::filesystem::path out;
};

struct ImageOptions {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

// Each command returns a process exit code and never throws; diagnostics go
// to `err`.

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err);
/// Same as above for a graph already in memory.
int cmd_verify(const NetworkGraph& graph, const VerifyOptions& opts, std::ostream& out,
               std::ostream& err);
int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err);
int cmd_generate(const GenerateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_make_image(const ImageOptions& opts, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bnn::cli
