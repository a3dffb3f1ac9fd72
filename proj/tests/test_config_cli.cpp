#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "pmri/cli.hpp"
#include "support/tempdir.hpp"

using namespace pmri;
using pmri::testing::TempDir;

namespace {

const char* kTinyConfig = R"({
  "seed": 4,
  "data": {"height": 16, "width": 16, "coils": 2, "train_slices": 4, "validation_slices": 2,
           "accelerations": [4], "center_fraction": 0.1},
  "model": {"cascades": 1, "widths": [4, 4]},
  "discriminator": {"widths": [4, 4]},
  "train": {"batch_size": 2, "pretrain_epochs": 1, "finetune_epochs": 1,
            "pretrain_learning_rate": 1e-3, "finetune_learning_rate": 1e-3},
  "metrics": {"sweep_slices": [0, 1]}
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pmri");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST(RunConfig, DefaultsAndOverrides) {
  const RunConfig d = RunConfig::from_json("{}");
  EXPECT_EQ(d.model.cascades, 3);
  EXPECT_EQ(d.train.batch_size, 4);
  EXPECT_EQ(d.train.pretrain_epochs, 15);
  EXPECT_DOUBLE_EQ(d.train.pretrain_learning_rate, 1e-4);

  const RunConfig c = RunConfig::from_json(kTinyConfig);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.model.height, 16);
  EXPECT_EQ(c.model.coils, 2);
  EXPECT_EQ(c.data.seed, 4u);
  EXPECT_NE(c.model.seed, c.discriminator.seed);
  EXPECT_EQ(c.train_config(Phase::SnFinetune).epochs, 1);
  EXPECT_NE(c.train_config(Phase::SnPretrain).seed, c.train_config(Phase::SnFinetune).seed);
}

TEST(RunConfig, UnknownKeysRejected) {
  EXPECT_THROW(RunConfig::from_json(R"({"sed": 1})"), ConfigError);
  try {
    RunConfig::from_json(R"({"loss": {"lamda": 1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("loss.lamda"), std::string::npos);
  }
  EXPECT_THROW(RunConfig::from_json(R"({"data": {"height": "big"}})"), ConfigError);
  EXPECT_THROW(RunConfig::from_json("{not json"), ConfigError);
  EXPECT_THROW(RunConfig::from_json(R"({"metrics": {"acceleration": 6}})"), ConfigError);
  EXPECT_THROW(RunConfig::from_json(R"({"loss": {"lambda": -1}})"), ConfigError);
}

TEST(RunConfig, EchoRoundTrip) {
  const RunConfig c = RunConfig::from_json(kTinyConfig);
  const RunConfig again = RunConfig::from_json(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
  RunConfig reseeded = c;
  reseeded.set_seed(99);
  EXPECT_EQ(reseeded.data.seed, 99u);
  EXPECT_NE(reseeded.model.seed, c.model.seed);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(UsageError("x")), kExitUsage);
  EXPECT_EQ(exit_code_for(ConfigError("x")), kExitUsage);
  EXPECT_EQ(exit_code_for(InterpSpecError("x")), kExitUsage);
  EXPECT_EQ(exit_code_for(BadMagicError("x")), kExitData);
  EXPECT_EQ(exit_code_for(IncompatibleModelsError("x")), kExitData);
  EXPECT_EQ(exit_code_for(DivergenceError("x")), kExitDivergence);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitFailure);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}), kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}), kExitUsage);
  EXPECT_EQ(cli({"simulate"}), kExitUsage);
  EXPECT_EQ(cli({"train", "--out", "x", "--data", "/nonexistent/d.mrds"}), kExitData);
  EXPECT_EQ(cli({"simulate", "--config", "/nonexistent.json", "--out", "x"}), kExitUsage);
}

TEST(Cli, TinyPipeline) {
  TempDir dir("cli");
  const auto p = [&](const char* n) { return (dir / n).string(); };
  spit(dir / "run.json", kTinyConfig);
  const std::string cfg = p("run.json");

  ASSERT_EQ(cli({"simulate", "--config", cfg, "--out", p("d.mrds")}), kExitOk);
  EXPECT_EQ(read_dataset(dir / "d.mrds").size(), 6u);
  EXPECT_EQ(cli({"train", "--config", cfg, "--data", p("d.mrds"), "--phase", "sn-finetune", "--out", p("x.mrin")}),
            kExitUsage);
  EXPECT_EQ(cli({"train", "--config", cfg, "--data", p("d.mrds"), "--phase", "bogus", "--out", p("x.mrin")}),
            kExitUsage);
  ASSERT_EQ(cli({"train", "--config", cfg, "--data", p("d.mrds"), "--out", p("pre.mrin")}), kExitOk);
  EXPECT_NE(slurp(dir / "pre.mrin.report.json").find("\"config\""), std::string::npos);
  ASSERT_EQ(cli({"train", "--config", cfg, "--data", p("d.mrds"), "--phase", "sn-finetune", "--pretrained",
                 p("pre.mrin"), "--out", p("sn.mrin")}),
            kExitOk);
  ASSERT_EQ(cli({"train", "--config", cfg, "--data", p("d.mrds"), "--phase", "sn-gan-finetune", "--pretrained",
                 p("pre.mrin"), "--out", p("gan.mrin")}),
            kExitOk);
  EXPECT_EQ(load_checkpoint(dir / "gan.mrin").tag, LossTag::SNGAN);

  EXPECT_EQ(cli({"interp", "--sn", p("sn.mrin"), "--gan", p("gan.mrin"), "--alpha", "1.5", "--out", p("bad.mrin")}),
            kExitUsage);
  EXPECT_FALSE(fs::exists(dir / "bad.mrin"));
  ASSERT_EQ(cli({"interp", "--sn", p("sn.mrin"), "--gan", p("gan.mrin"), "--alpha", "0.5", "--out", p("mid.mrin")}),
            kExitOk);
  const ModelCheckpoint mid = load_checkpoint(dir / "mid.mrin");
  EXPECT_EQ(mid.tag, LossTag::Interp);
  EXPECT_EQ(mid.provenance.coefficients, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(cli({"interp", "--models", p("sn.mrin"), p("gan.mrin"), p("mid.mrin"), "--coefficients", "0.2", "0.3",
                 "0.5", "--out", p("three.mrin")}),
            kExitOk);
  spit(dir / "junk.mrin", "not a checkpoint");
  EXPECT_EQ(cli({"interp", "--sn", p("sn.mrin"), "--gan", p("junk.mrin"), "--out", p("j.mrin")}), kExitData);

  ASSERT_EQ(cli({"eval", "--config", cfg, "--checkpoint", p("mid.mrin"), "--data", p("d.mrds"), "--out", p("ev"),
                 "--name", "mid"}),
            kExitOk);
  EXPECT_TRUE(fs::exists(dir / "ev" / "mid_af4.json"));
  EXPECT_EQ(slurp(dir / "ev" / "mid_af4.csv").rfind("slice,nmse,psnr,ssim\n", 0), 0u);
  ASSERT_EQ(cli({"eval", "--config", cfg, "--zero-filled", "--data", p("d.mrds"), "--out", p("ev"), "--name", "zf"}),
            kExitOk);
  EXPECT_NE(slurp(dir / "ev" / "zf_af4.json").find("zero-filled"), std::string::npos);
  EXPECT_EQ(cli({"eval", "--config", cfg, "--data", p("d.mrds"), "--out", p("ev")}), kExitUsage);

  ASSERT_EQ(cli({"sweep", "--config", cfg, "--sn", p("sn.mrin"), "--gan", p("gan.mrin"), "--data", p("d.mrds"),
                 "--out", p("sw")}),
            kExitOk);
  const std::string csv = slurp(dir / "sw" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(dir / "sw")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 10);  // 5 grid points x 2 sweep slices
  EXPECT_EQ(cli({"sweep", "--config", cfg, "--sn", p("sn.mrin"), "--gan", p("gan.mrin"), "--data", p("d.mrds"),
                 "--grid", "0,2", "--out", p("sw2")}),
            kExitUsage);
}
