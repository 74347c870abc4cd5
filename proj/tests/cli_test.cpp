#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bnn/cli.hpp"
#include "bnn/harness.hpp"
#include "bnn/model_io.hpp"
#include "bnn/tensor_io.hpp"
#include "bnn/zoo.hpp"
#include "test_util.hpp"

using namespace bnn;

namespace {

struct Output {
  int code;
  std::string out;
  std::string err;
};

Output run(std::vector<std::string> args) {
  args.insert(args.begin(), "bnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string model_file(const std::string& topology) {
  const auto path = test::temp_path("cli_" + topology + ".pbit");
  const Output o = run({"generate", "--topology", topology, "--out", path.string()});
  EXPECT_EQ(o.code, 0) << o.err;
  return path.string();
}

}  // namespace

TEST(CliRun, WritesOutputEqualToLibraryInfer) {
  const std::string model = model_file("tiny");
  const auto img_path = test::temp_path("cli_tiny.pbim");
  const auto out_path = test::temp_path("cli_tiny_out.pbft");
  std::filesystem::remove(out_path);
  ASSERT_EQ(run({"make-image", "--height", "12", "--width", "12", "--seed", "3", "--out",
                 img_path.string()})
                .code,
            0);
  const Output o = run({"run", "--model", model, "--input", img_path.string(), "--output",
                        out_path.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("latency"), std::string::npos);
  ASSERT_TRUE(std::filesystem::exists(out_path));

  const NetworkGraph g = load_model(model);
  const FloatTensor expected = infer(g, load_image(img_path)).output;
  EXPECT_EQ(read_file(out_path), encode_float_tensor(expected));
}

TEST(CliRun, MissingModelNamesThePath) {
  const std::string missing = test::temp_path("no_such_model.pbit").string();
  const Output o = run({"run", "--model", missing, "--input", "x.pbim", "--output", "y.pbft"});
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.err.find(missing), std::string::npos) << o.err;
}

TEST(CliRun, WrongImageShapeFails) {
  const std::string model = model_file("tiny");
  const auto img_path = test::temp_path("cli_wrong.pbim");
  ASSERT_EQ(run({"make-image", "--height", "5", "--width", "12", "--out", img_path.string()}).code, 0);
  const Output o = run({"run", "--model", model, "--input", img_path.string(), "--output",
                        test::temp_path("cli_wrong.pbft").string()});
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.err.find("shape"), std::string::npos) << o.err;
}

TEST(CliRun, ExecutableReportsMissingModel) {
  const std::string missing = test::temp_path("no_such_model_exe.pbit").string();
  const auto log = test::temp_path("cli_exe.log");
  const std::string cmd = std::string(BNN_CLI_PATH) + " run --model " + missing +
                          " --input a --output b 2> " + log.string();
  const int status = std::system(cmd.c_str());
  EXPECT_NE(status, 0);
  std::ifstream in(log);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find(missing), std::string::npos) << text;
}

TEST(CliVerify, WellFormedModelPasses) {
  const Output o = run({"verify", "--model", model_file("tiny"), "--trials", "5", "--seed", "9"});
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("OK"), std::string::npos);
}

TEST(CliVerify, FixedSeedGivesIdenticalReport) {
  const std::string model = model_file("tiny");
  const Output a = run({"verify", "--model", model, "--trials", "3", "--seed", "17"});
  const Output b = run({"verify", "--model", model, "--trials", "3", "--seed", "17"});
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.code, b.code);
}

TEST(CliVerify, CorruptedThresholdIsDetected) {
  const zoo::Topology t = zoo::tiny();
  NetworkGraph g = build(t.specs, t.input);
  auto& layer = std::get<FusedConvLayer>(g.mutable_layer_for_testing(2));
  for (auto& xi : layer.xi) xi = -xi + 0.5;

  std::ostringstream out, err;
  cli::VerifyOptions opts;
  opts.trials = 3;
  EXPECT_NE(cli::cmd_verify(g, opts, out, err), 0);
  EXPECT_NE(err.str().find("MISMATCH"), std::string::npos) << err.str();
  EXPECT_NE(err.str().find("conv2"), std::string::npos) << err.str();

  const VerifyReport report = verify_model(g, 3, 0);
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.mismatch->layer, 2u);
}

TEST(CliBench, YoloShapedModelHasNineRows) {
  const std::string model = model_file("yolov2-tiny");
  const Output o = run({"bench", "--model", model, "--repeats", "3", "--threads", "1", "--json"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = nlohmann::json::parse(o.out);
  ASSERT_EQ(j["layers"].size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(j["layers"][i]["name"], "conv" + std::to_string(i + 1));
  }
  EXPECT_EQ(j["repeats"], 3);
  EXPECT_GT(j["throughput_ips"].get<double>(), 0.0);
  EXPECT_TRUE(j["oracle_comparison"].is_object());
}

TEST(CliBench, RowSetStableAcrossRepeatCounts) {
  const NetworkGraph g = load_model(model_file("yolov2-tiny"));
  const Executor exec(1);
  const BenchReport a = bench_model(g, 3, exec, false);
  const BenchReport b = bench_model(g, 9, exec, false);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    EXPECT_EQ(a.layers[i].name, b.layers[i].name);
    EXPECT_EQ(a.layers[i].output, b.layers[i].output);
  }
}

TEST(CliBench, LayerRowsSumCloseToTotal) {
  const NetworkGraph g = load_model(model_file("yolov2-tiny"));
  const BenchReport r = bench_model(g, 9, Executor(1), false);
  EXPECT_NEAR(r.layer_sum_ms(), r.total_ms, 0.2 * r.total_ms);
}

TEST(CliBench, RejectsTooFewRepeats) {
  const Output o = run({"bench", "--model", model_file("tiny"), "--repeats", "2"});
  EXPECT_NE(o.code, 0);
}

TEST(CliBench, TableOutput) {
  const Output o = run({"bench", "--model", model_file("tiny"), "--repeats", "3"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("conv1"), std::string::npos);
  EXPECT_NE(o.out.find("throughput"), std::string::npos);
}

TEST(CliGenerate, UnknownTopologyFails) {
  const Output o = run({"generate", "--topology", "resnet", "--out",
                        test::temp_path("x.pbit").string()});
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.err.find("resnet"), std::string::npos);
}

TEST(Cli, UnknownSubcommandFails) { EXPECT_NE(run({"frobnicate"}).code, 0); }
