#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nowcast/cli.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("nowcast_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nowcast");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_main(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small archive, quarter-width models, one epoch.
fs::path write_smoke_config(const fs::path& dir, const fs::path& run_dir) {
  const auto path = dir / "config.yaml";
  std::ofstream(path) << "seed: 3\n"
                      << "output_dir: " << run_dir.string() << "\n"
                      << "synth:\n  n_frames: 96\n  rows: 80\n  cols: 80\n  n_cells: 10\n"
                      << "  amplitude_range: [0.05, 0.3]\n  cell_sigma_range: [14, 26]\n"
                      << "prepare:\n  test_fraction: 0.3\n"
                      << "generator:\n  width_scale: 0.25\n  cbam_reduction: 4\n"
                      << "discriminator:\n  width_scale: 0.25\n  cbam_reduction: 4\n"
                      << "train:\n  max_epochs: 1\n  batch_size: 4\n"
                      << "evaluate:\n  runs: 2\n"
                      << "uncertainty:\n  k: 3\n  export_samples: 1\n";
  return path;
}

}  // namespace

TEST(RunConfig, DefaultsAndSeedPropagation) {
  auto c = load_run_config(YAML::Load("seed: 7"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.cfg.seed, 7u);
  EXPECT_EQ(c.generator.seed, 7u);
  EXPECT_EQ(c.discriminator.seed, 8u);
  EXPECT_EQ(c.train.cfg.batch_size, 32);
  EXPECT_EQ(c.evaluate.opts.runs, 10);
  auto d = load_run_config(YAML::Load("seed: 7\ntrain: {seed: 1}"));
  EXPECT_EQ(d.train.cfg.seed, 1u);
  EXPECT_EQ(d.generator.seed, 7u);
}

TEST(RunConfig, SectionsMapOntoComponentConfigs) {
  auto c = load_run_config(YAML::Load(R"(
generator: {width_scale: 0.25, encoder_widths: [8, 16, 32, 64, 64]}
train: {plateau_patience: 3, lambda: 1000, resume: true}
prepare: {rainy_criterion: every_output, test_start: 2021-01-01, crop_row: 5, crop_col: 6}
evaluate: {thresholds: [1, 2], rule: inclusive}
synth: {amplitude_range: [0.1, 0.2], start: 2019-06-01T12:00:00Z}
gradcam: {layers: [enc_map/d1/cbam]}
)"));
  EXPECT_EQ(c.generator.width_scale, 0.25);
  EXPECT_EQ(c.generator.encoder_widths, (std::vector<int>{8, 16, 32, 64, 64}));
  EXPECT_EQ(c.train.cfg.plateau_patience, 3);
  EXPECT_EQ(c.train.cfg.lambda, 1000);
  EXPECT_TRUE(c.train.resume);
  const auto p = c.prepare.to_prepare_config();
  EXPECT_EQ(p.selection.criterion, RainyCriterion::every_output);
  EXPECT_EQ(format_timestamp(*p.test_start), "2021-01-01T00:00:00Z");
  EXPECT_EQ(p.crop->origin_row, 5);
  EXPECT_EQ(c.evaluate.opts.thresholds, (std::vector<double>{1, 2}));
  EXPECT_EQ(c.evaluate.opts.rule, Exceedance::inclusive);
  EXPECT_EQ(c.synth.amplitude_range, (std::pair<double, double>{0.1, 0.2}));
  EXPECT_EQ(format_timestamp(c.synth.start), "2019-06-01T12:00:00Z");
  EXPECT_EQ(c.gradcam.layers.size(), 1u);
}

TEST(RunConfig, UnknownKeysAndBadValuesNameTheKey) {
  auto key_of = [](const std::string& yaml) {
    try {
      load_run_config(YAML::Load(yaml));
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(key_of("train: {batch_sise: 4}"), "train.batch_sise");
  EXPECT_EQ(key_of("trian: {batch_size: 4}"), "trian");
  EXPECT_EQ(key_of("train: {batch_size: four}"), "train.batch_size");
  EXPECT_EQ(key_of("prepare: {rainy_criterion: most}"), "prepare.rainy_criterion");
  EXPECT_EQ(key_of("synth: {start: yesterday}"), "synth.start");
  EXPECT_EQ(key_of("train: 3"), "train");
  EXPECT_EQ(key_of("train: {batch_size: 4}"), "<none>");
}

TEST(RunConfig, OverridesApplyInOrder) {
  const char* env[] = {"NOWCAST_TRAIN__BATCH_SIZE=5", "NOWCAST_SEED=11", "OTHER=1", "NOWCAST_GENERATOR__ENCODER_WIDTHS=[1, 2, 3, 4, 5]",
                       nullptr};
  auto ov = env_overrides(const_cast<char**>(env));
  ASSERT_EQ(ov.size(), 3u);
  EXPECT_EQ(ov[0], (std::pair<std::string, std::string>{"train.batch_size", "5"}));
  EXPECT_EQ(ov[1].first, "seed");
  ov.emplace_back("train.batch_size", "6");
  auto c = load_run_config(YAML::Load("train: {batch_size: 4}"), ov);
  EXPECT_EQ(c.train.cfg.batch_size, 6);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.generator.encoder_widths, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_THROW(load_run_config({}, {{"train.nope", "1"}}), ConfigError);
  EXPECT_THROW(load_run_config({}, {{"a.b.c", "1"}}), ConfigError);
}

TEST(RunConfig, ResolvedConfigReloadsToItself) {
  auto c = load_run_config(YAML::Load("seed: 4\ntrain: {lr_generator: 0.0003}\nprepare: {test_start: 2020-02-03}\n"));
  const auto text = to_yaml_string(c);
  EXPECT_NE(text.find("code_version"), std::string::npos);
  auto again = load_run_config(YAML::Load(text));
  EXPECT_EQ(again.train.cfg.lr_generator, 0.0003);
  EXPECT_EQ(again.prepare.test_start, c.prepare.test_start);
  EXPECT_EQ(to_yaml_string(again), text);
}

TEST(RunConfig, TimestampParsing) {
  EXPECT_EQ(parse_timestamp("1970-01-01T00:05:00Z"), from_epoch_seconds(300));
  EXPECT_EQ(parse_timestamp("2020-03-01"), from_epoch_seconds(1583020800));
  EXPECT_THROW(parse_timestamp("2020-02-30"), ArgumentError);
  EXPECT_THROW(parse_timestamp("noon"), ArgumentError);
}

TEST(Cli, UsageAndConfigErrorsExitWithTwo) {
  EXPECT_EQ(run_cli({"evaluate", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"train", "transformer"}).code, 2);
  const auto dir = scratch("errors");
  auto r = run_cli({"evaluate", "-o", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos) << r.err;
  r = run_cli({"synth", "--set", "synth.n_frames=0", "-o", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("n_frames"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"synth", "-c", (dir / "missing.yaml").string()}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, RuntimeFailureExitsWithOne) {
  const auto dir = scratch("runtime");
  std::ofstream(dir / "junk.h5") << "not hdf5";
  auto r = run_cli({"prepare-data", "-o", dir.string(), "--set", "data.archive=" + (dir / "junk.h5").string()});
  EXPECT_EQ(r.code, 1) << r.err;
}

TEST(Cli, BinaryReportsExitCodes) {
  const std::string bin = NOWCAST_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(bin + " --help"), 0);
  EXPECT_EQ(status(bin + " synth --bogus"), 2);
  EXPECT_EQ(status(bin + " evaluate -o " + scratch("bin").string()), 2);
}

TEST(Cli, SmokeRunSynthPrepareTrainGanEvaluateAndReport) {
  const auto dir = scratch("smoke");
  const auto cfg = write_smoke_config(dir, dir / "run").string();
  auto step = [&](std::vector<std::string> args) {
    args.push_back("-c");
    args.push_back(cfg);
    auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << args.front() << ": " << r.err;
    return r;
  };
  step({"synth"});
  step({"prepare-data"});
  step({"train", "gan"});
  const auto ckpt = dir / "run" / "train_gan" / "checkpoints" / "generator_best.bin";
  ASSERT_TRUE(fs::exists(ckpt));
  ASSERT_TRUE(fs::exists(sidecar_path(ckpt)));
  const auto summary = read_json(dir / "run" / "train_gan" / "train_summary.json");
  EXPECT_EQ(summary["variant"], "gan");
  for (const auto* stage : {"synth", "prepare", "train_gan"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / stage / "resolved_config.yaml")) << stage;
    EXPECT_EQ(slurp(dir / "run" / stage / "code_version.txt"), std::string(code_version()) + "\n");
  }

  step({"evaluate", "--checkpoint", ckpt.string()});
  const auto metrics = read_json(dir / "run" / "evaluate" / "gan" / "metrics.json");
  EXPECT_EQ(metrics["model"], "gan");
  EXPECT_TRUE(fs::exists(dir / "run" / "evaluate" / "persistence" / "metrics.csv"));

  step({"predict", "--checkpoint", ckpt.string()});
  EXPECT_EQ(read_array(dir / "run" / "predict" / "predictions.h5", "prediction").dim(1), 12);

  step({"uncertainty", "epistemic", "--checkpoint", ckpt.string()});
  const auto var = read_array(dir / "run" / "uncertainty_epistemic" / "maps.h5", "variance");
  EXPECT_EQ(var.shape(), (Shape{1, 12, 64, 64}));
  for (float v : var.values()) ASSERT_GE(v, 0.0f);
  EXPECT_EQ(run_cli({"uncertainty", "aleatoric", "-c", cfg, "--checkpoint", ckpt.string()}).code, 2);

  step({"gradcam", "--checkpoint", ckpt.string()});
  EXPECT_EQ(read_json(dir / "run" / "gradcam" / "gradcam.json")["heatmaps"].size(), 24u);
  EXPECT_TRUE(fs::exists(dir / "run" / "gradcam" / "gradcam_grid.png"));
  auto r = run_cli({"gradcam", "-c", cfg, "--checkpoint", ckpt.string(), "--layer", "enc_map/d9/dsc"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("layer"), std::string::npos);

  step({"report"});
  for (const auto* f : {"summary_table.csv", "summary_table.md", "mse_by_leadtime.png", "validation_loss.png",
                        "epistemic_by_leadtime.png"})
    EXPECT_TRUE(fs::exists(dir / "run" / "report" / f)) << f;

  // Reproducibility: an identical configuration in a fresh directory gives identical metrics.
  const auto dir2 = scratch("smoke_again");
  const auto cfg2 = write_smoke_config(dir2, dir2 / "run").string();
  for (std::vector<std::string> args : {std::vector<std::string>{"synth"}, {"prepare-data"}, {"train", "gan"}}) {
    args.push_back("-c");
    args.push_back(cfg2);
    ASSERT_EQ(run_cli(args).code, 0);
  }
  ASSERT_EQ(run_cli({"evaluate", "-c", cfg2, "--checkpoint", (dir2 / "run/train_gan/checkpoints/generator_best.bin").string()}).code, 0);
  EXPECT_EQ(slurp(dir2 / "run" / "evaluate" / "gan" / "metrics.json"), slurp(dir / "run" / "evaluate" / "gan" / "metrics.json"));
}
