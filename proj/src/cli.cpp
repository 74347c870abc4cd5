#include "bnn/cli.hpp"

#include <cstdio>
#include <random>

#include <CLI11.hpp>

#include "bnn/harness.hpp"
#include "bnn/model_io.hpp"
#include "bnn/tensor_io.hpp"
#include "bnn/zoo.hpp"

namespace bnn::cli {
namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string format_ms(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const NetworkGraph graph = load_model(opts.model);
    const ByteTensor img = load_image(opts.input);
    if (img.shape() != graph.input_shape()) {
      err << "error: input " << opts.input.string() << " has shape " << img.shape().to_string()
          << ", model expects " << graph.input_shape().to_string() << '\n';
      return 1;
    }
    const Executor exec(opts.threads);
    const InferResult res = infer(graph, img, exec);
    save_float_tensor(res.output, opts.output);
    out << "latency " << format_ms(res.total_ms) << " ms, output "
        << res.output.shape().to_string() << " written to "
        << opts.output.string() << '\n';
    return 0;
  });
}

int cmd_verify(const NetworkGraph& graph, const VerifyOptions& opts, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const Executor exec(opts.threads);
    const VerifyReport report = verify_model(graph, opts.trials, opts.seed, exec);
    if (report.ok()) {
      out << report.to_string() << '\n';
      return 0;
    }
    err << report.to_string() << '\n';
    return 2;
  });
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] { return cmd_verify(load_model(opts.model), opts, out, err); });
}

int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const NetworkGraph graph = load_model(opts.model);
    const Executor exec(opts.threads);
    const BenchReport report =
        bench_model(graph, opts.repeats, exec, opts.oracle_check, opts.model.filename().string());
    out << (opts.json ? report.to_json() + "\n" : report.to_table());
    return 0;
  });
}

int cmd_generate(const GenerateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const zoo::Topology topo = zoo::by_name(opts.topology, opts.input_size, opts.seed);
    const NetworkGraph graph = build(topo.specs, topo.input);
    const auto bytes = save_model(graph, opts.out);
    out << topo.name << ": " << graph.size() << " layers, input " << graph.input_shape().to_string()
        << ", " << bytes.size() << " bytes written to " << opts.out.string() << '\n';
    return 0;
  });
}

int cmd_make_image(const ImageOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::mt19937_64 rng(opts.seed);
    const ByteTensor img = zoo::random_image(Shape{1, opts.height, opts.width, opts.channels}, rng);
    save_image(img, opts.out);
    out << "image " << img.shape().to_string() << " written to " << opts.out.string() << '\n';
    return 0;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Packed binary neural network inference", "bnn");
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run inference on one image");
  run_cmd->add_option("--model", run.model, "Model file")->required();
  run_cmd->add_option("--input", run.input, "Input image (PBIM)")->required();
  run_cmd->add_option("--output", run.output, "Output tensor (PBFT)")->required();
  run_cmd->add_option("--threads", run.threads, "Worker threads, 0 for all cores");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Compare the engine with the reference on random inputs");
  verify_cmd->add_option("--model", verify.model, "Model file")->required();
  verify_cmd->add_option("--trials", verify.trials, "Number of random inputs")->capture_default_str();
  verify_cmd->add_option("--seed", verify.seed, "Random seed")->capture_default_str();
  verify_cmd->add_option("--threads", verify.threads, "Worker threads, 0 for all cores");

  BenchOptions bench;
  bool no_oracle = false;
  auto* bench_cmd = app.add_subcommand("bench", "Per-layer timing");
  bench_cmd->add_option("--model", bench.model, "Model file")->required();
  bench_cmd->add_option("--repeats", bench.repeats, "Timed runs after one warmup")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{3}, std::size_t{1} << 20));
  bench_cmd->add_option("--threads", bench.threads, "Worker threads, 0 for all cores");
  bench_cmd->add_flag("--json", bench.json, "Print the report as JSON");
  bench_cmd->add_flag("--no-oracle-check", no_oracle, "Skip the reference conv timing");

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "Write a random-weight model");
  gen_cmd->add_option("--topology", gen.topology, "yolov2-tiny, alexnet, vgg16 or tiny")
      ->capture_default_str();
  gen_cmd->add_option("--input-size", gen.input_size, "Input height and width");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output model file")->required();

  ImageOptions image;
  auto* image_cmd = app.add_subcommand("make-image", "Write a random input image");
  image_cmd->add_option("--height", image.height)->required();
  image_cmd->add_option("--width", image.width)->required();
  image_cmd->add_option("--channels", image.channels)->capture_default_str();
  image_cmd->add_option("--seed", image.seed)->capture_default_str();
  image_cmd->add_option("--out", image.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (*run_cmd) return cmd_run(run, out, err);
  if (*verify_cmd) return cmd_verify(verify, out, err);
  if (*bench_cmd) {
    bench.oracle_check = !no_oracle;
    return cmd_bench(bench, out, err);
  }
  if (*gen_cmd) return cmd_generate(gen, out, err);
  return cmd_make_image(image, out, err);
}

}  // namespace bnn::cli
