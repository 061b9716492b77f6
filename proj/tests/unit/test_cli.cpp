#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "athv/cli.hpp"
#include "athv/container.hpp"
#include "athv/data.hpp"
#include "athv/kvtext.hpp"
#include "athv/networks.hpp"

using namespace athv;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Points ATHV_OUT at a fresh directory for the lifetime of the object.
struct ScopedRoot {
  fs::path dir;
  explicit ScopedRoot(const std::string& name) : dir(fs::temp_directory_path() / ("athv_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    setenv("ATHV_OUT", dir.c_str(), 1);
  }
  ~ScopedRoot() { unsetenv("ATHV_OUT"); }
};

std::string read_text(const fs::path& p) {
  const auto b = read_file_bytes(p);
  return std::string(b.begin(), b.end());
}

void write_text(const fs::path& p, const std::string& s) {
  write_file_bytes(p, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace

TEST(Cli, UnknownFlagIsOneLineError) {
  const CliResult r = run({"make-mask", "--width", "32", "--bogus"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, MissingSubcommandAndMissingFile) {
  EXPECT_NE(run({}).code, 0);
  ScopedRoot root("missing");
  const CliResult r = run({"rank-score", "--file", "nope.csv"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: io: ", 0), 0u) << r.err;
}

TEST(Cli, HelpSucceeds) {
  const CliResult r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("make-mask"), std::string::npos);
}

TEST(Cli, MakeMaskCountsColumns) {
  ScopedRoot root("mask");
  const CliResult r = run({"make-mask", "--width", "320", "--accel", "4", "--cf", "0.08", "--kind", "random", "--seed", "1",
                     "--out", "m4.athv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("sampled_columns=80"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("center_cols=26"), std::string::npos) << r.out;
  const Mask m = read_mask(root.dir / "m4.athv");
  EXPECT_EQ(m.sampled_columns(), 80u);
  const KeyValues meta = parse_key_values(read_text(root.dir / "m4.athv.meta"));
  EXPECT_EQ(meta.at("kind"), "random");
  EXPECT_EQ(meta.at("accel"), "4");
  EXPECT_EQ(meta.at("seed"), "1");
}

TEST(Cli, MakeMaskRejectsContradiction) {
  ScopedRoot root("mask_bad");
  const CliResult r = run({"make-mask", "--width", "32", "--accel", "8", "--cf", "0.5"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: infeasible: ", 0), 0u) << r.err;
}

TEST(Cli, RankScoreStudy) {
  ScopedRoot root("rank");
  const CliResult r = run({"rank-score", "--file", std::string(ATHV_TEST_DATA_DIR) + "/ranking_study.csv", "--models",
                     "unet,wnet,e2e-varnet,atthybrid-varnet", "--out", "scores.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "model,raw_rank\nunet,396\nwnet,296\ne2e-varnet,164\natthybrid-varnet,144\n\n"
            "model,priority_score\nunet,0.26\nwnet,0.51\ne2e-varnet,0.84\natthybrid-varnet,0.89\n");
  EXPECT_EQ(read_text(root.dir / "scores.csv").substr(0, 31), "model,raw_rank,priority_score\nu");
}

TEST(Cli, RankScoreSingleRecord) {
  ScopedRoot root("rank1");
  write_text(root.dir / "one.csv", "s1,a=1,b=2,c=3,d=4\n");
  const CliResult r = run({"rank-score", "--file", "one.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("a,1.00\nb,0.75\nc,0.50\nd,0.25\n"), std::string::npos) << r.out;
}

TEST(Cli, RankScoreDuplicateRankIsParseError) {
  ScopedRoot root("rank_dup");
  write_text(root.dir / "tie.csv", "s1,a=1,b=1,c=3,d=4\n");
  const CliResult r = run({"rank-score", "--file", "tie.csv"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: parse: ", 0), 0u) << r.err;
}

TEST(Cli, Pgm16RoundTrip) {
  cli::Gray16 g{2, 3, {0, 1, 256, 65535, 1234, 40000}};
  const auto bytes = cli::encode_pgm(g);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 13), "P5\n3 2\n65535\n");
  EXPECT_EQ(bytes.size(), 13u + 12u);
  EXPECT_EQ(bytes[13 + 4], 0x01);  // 256 big-endian
  EXPECT_EQ(bytes[13 + 5], 0x00);
  EXPECT_EQ(cli::decode_pgm(bytes), g);
}

TEST(Cli, ErrorMapIsTripledAndClipped) {
  const Tensor<double> x(Shape{1, 4}, std::vector<double>{0, 0, 0, 0});
  const Tensor<double> y(Shape{1, 4}, std::vector<double>{0.1, -0.2, 0.3, 0.6});
  const auto e = cli::error_map(x, y);
  EXPECT_DOUBLE_EQ(e[0], 0.5);
  EXPECT_DOUBLE_EQ(e[1], 1.0);
  EXPECT_DOUBLE_EQ(e[2], 1.0);
  EXPECT_DOUBLE_EQ(e[3], 1.0);
  const auto same = cli::error_map(x, x);
  for (double v : same.data()) EXPECT_EQ(v, 0.0);
}

TEST(Cli, ToGrayQuantizes) {
  const auto g = cli::to_gray(Tensor<double>(Shape{1, 4}, std::vector<double>{-1, 0.5, 1, 2}), 2.0);
  EXPECT_EQ(g.pixels, (std::vector<std::uint16_t>{0, 16384, 32768, 65535}));
}

TEST(Cli, CropZoom) {
  Tensor<double> img(Shape{4, 4});
  for (std::size_t i = 0; i < 16; ++i) img[i] = double(i);
  const auto z = cli::crop_zoom(img, cli::parse_crop("1,2,2,1"), 2);
  EXPECT_EQ(z.shape(), (Shape{4, 2}));
  EXPECT_EQ(z, (Tensor<double>(Shape{4, 2}, std::vector<double>{6, 6, 6, 6, 10, 10, 10, 10})));
  EXPECT_THROW(cli::parse_crop("1,2,3"), Error);
  EXPECT_THROW(cli::crop_zoom(img, cli::parse_crop("3,3,2,2"), 1), Error);
}

TEST(Cli, EndToEndPipelineIsDeterministic) {
  ScopedRoot root("pipeline");
  ASSERT_EQ(run({"make-data", "--out", "data", "--count", "4", "--size", "32", "--coils", "2", "--ellipses", "4",
                 "--ratio", "0.5", "--seed", "3"}).code, 0);
  EXPECT_TRUE(fs::exists(root.dir / "data" / "manifest.txt"));
  write_text(root.dir / "c.txt",
             "data_dir = data\nout_dir = run\narch = atthybrid-varnet\ncascades = 1\ncoils = 2\nunet_base = 4\n"
             "unet_depth = 1\ncascade_base = 4\ncascade_depth = 1\nsens_base = 4\nsens_depth = 1\nepochs = 2\n"
             "batch_size = 1\ncenter_fraction = 0.125\nseed = 2\n");
  for (const char* out : {"run", "run2"}) {
    const CliResult r = run({"train", "--config", "c.txt", "--set", std::string("out_dir=") + out});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(read_text(root.dir / "run" / "metrics.csv"), read_text(root.dir / "run2" / "metrics.csv"));
  EXPECT_EQ(read_text(root.dir / "run" / "steps.csv"), read_text(root.dir / "run2" / "steps.csv"));

  const CliResult gt = run({"evaluate", "--ground-truth", "--data", "data", "--cf", "0.125", "--out", "gt.csv"});
  ASSERT_EQ(gt.code, 0) << gt.err;
  const std::string csv = read_text(root.dir / "gt.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "sample_id,model,psnr,ssim,nrmse");
  while (std::getline(lines, line))
    if (line.find(",ground-truth,") != std::string::npos) EXPECT_NE(line.find(",200,1,0"), std::string::npos) << line;

  for (const char* out : {"cmp", "cmp2"}) {
    const CliResult r = run({"compare", "--model", "hybrid=run/final.athv", "--data", "data", "--accel", "4", "--accel",
                       "8", "--cf", "0.125", "--cf", "0.0625", "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const std::string table = read_text(root.dir / "cmp" / "compare.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "model,psnr_4x,ssim_4x,psnr_8x,ssim_8x");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);  // header, model, zero-filled
  for (const char* f : {"compare.csv", "compare_samples.csv", "grid_4x.pgm", "grid_8x.pgm"})
    EXPECT_EQ(read_file_bytes(root.dir / "cmp" / f), read_file_bytes(root.dir / "cmp2" / f)) << f;
  const auto grid = cli::decode_pgm(read_file_bytes(root.dir / "cmp" / "grid_4x.pgm"));
  EXPECT_EQ(grid.width, 2u + 3 * (32 + 2));
  EXPECT_EQ(grid.height, 2u + 3 * (32 + 2));

  const CliResult rec = run({"reconstruct", "--checkpoint", "run/final.athv", "--data", "data", "--cf", "0.125", "--out",
                       "rec"});
  ASSERT_EQ(rec.code, 0) << rec.err;
  EXPECT_TRUE(fs::exists(root.dir / "rec" / "reconstructions.athv"));
  EXPECT_TRUE(fs::exists(root.dir / "rec" / "reconstruct.txt"));
}

TEST(Cli, CompareRowsFollowCommandLineOrder) {
  ScopedRoot root("order");
  ASSERT_EQ(run({"make-data", "--out", "d", "--count", "2", "--size", "32", "--coils", "2", "--ratio", "0.5"}).code, 0);
  ModelConfig cfg;
  cfg.coils = 2;
  cfg.cascades = 1;
  cfg.unet = {1, 1, 4, 1, false};
  cfg.cascade_unet = {2, 2, 4, 1, false};
  cfg.sens_unet = {2, 2, 4, 1, false};
  cfg.arch = Arch::UNet;
  save_model(build_model<float>(cfg, 1), root.dir / "u.athv");
  cfg.arch = Arch::WNet;
  save_model(build_model<float>(cfg, 1), root.dir / "w.athv");
  const CliResult r = run({"compare", "--model", "wnet=w.athv", "--model", "unet=u.athv", "--data", "d", "--out", "c"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("wnet,"), r.out.find('\n') + 1) << r.out;
  EXPECT_LT(r.out.find("wnet,"), r.out.find("unet,"));
  EXPECT_LT(r.out.find("unet,"), r.out.find("zero-filled,"));
  const CliResult dup = run({"compare", "--model", "a=w.athv", "--model", "a=u.athv", "--data", "d"});
  EXPECT_EQ(dup.code, 1);
}
