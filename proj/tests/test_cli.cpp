// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fhr/io.hpp"

namespace fs = std::filesystem;

namespace {

const char* const kSmallConfig = R"(# tiny experiment for CLI tests
phantom.dims = 32,32,32
phantom.origin = -15.5,-15.5,-15.5
phantom.sigma = 1
phantom.ellipsoid0 = 0,0,2, 6,5,7, 0.8
phantom.tube0 = -8,-6,-6, 7,6,9, 1.5, 1
trajectory.kind = linear
trajectory.n_frames = 8
trajectory.step = 0.5
frame.height = 24
frame.width = 24
scan.start = 0,0,-2,0.02,-0.03,0.05
recon.dims = 12,12,8
recon.origin = -5.5,-5.5,-0.5
refine.iterations = 3
prior.train_phantoms = 2
prior.fakes_per_phantom = 1
bench.seeds = 2
)";

struct TempDir {
    fs::path path;
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path = fs::temp_directory_path() / (std::string("fhr_cli_") + info->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(FHR_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
    const fs::path p = dir / "small.cfg";
    std::ofstream(p) << kSmallConfig << extra;
    return p;
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
    TempDir tmp;
    EXPECT_EQ(run("", tmp.path / "log"), 1);
    EXPECT_EQ(run("frobnicate", tmp.path / "log"), 1);
    EXPECT_EQ(run("--config " + (tmp.path / "missing.cfg").string() + " phantom", tmp.path / "log"), 1);
    EXPECT_EQ(run("--out " + tmp.path.string() + " gradcheck --max-frames 9", tmp.path / "log"), 1);
    EXPECT_EQ(run("--out " + tmp.path.string() + " gradcheck --max-grid 30", tmp.path / "log"), 1);
    EXPECT_EQ(run("--help", tmp.path / "log"), 0);
}

TEST(Cli, GradcheckPasses) {
    TempDir tmp;
    const int code = run("--out " + tmp.path.string() + " gradcheck --instances 2 --max-grid 17", tmp.path / "log");
    const std::string log = slurp(tmp.path / "log");
    EXPECT_EQ(code, 0) << log;
    EXPECT_NE(log.find("PASS"), std::string::npos);
}

TEST(Cli, PipelineStagesCompose) {
    TempDir tmp;
    const std::string base = "--config " + write_config(tmp.path).string() + " --out " + tmp.path.string() + " --seed 4 ";
    ASSERT_EQ(run(base + "phantom", tmp.path / "log"), 0) << slurp(tmp.path / "log");
    ASSERT_TRUE(fs::exists(tmp.path / "phantom.vol"));
    ASSERT_EQ(run(base + "scan --phantom " + (tmp.path / "phantom.vol").string(), tmp.path / "log"), 0)
        << slurp(tmp.path / "log");
    const fhr::Sequence seq = fhr::read_sequence(tmp.path / "sequence");
    EXPECT_EQ(seq.size(), 8u);
    ASSERT_EQ(run(base + "estimate", tmp.path / "log"), 0) << slurp(tmp.path / "log");
    EXPECT_EQ(fhr::read_poses(tmp.path / "initial.csv").size(), 7u);
    ASSERT_EQ(run(base + "reconstruct --poses " + (tmp.path / "initial.csv").string(), tmp.path / "log"), 0)
        << slurp(tmp.path / "log");
    EXPECT_EQ(fhr::read_volume(tmp.path / "recon.vol").grid.dims, (std::array<int, 3>{12, 12, 8}));
    ASSERT_EQ(run(base + "refine", tmp.path / "log"), 0) << slurp(tmp.path / "log");
    EXPECT_TRUE(fs::exists(tmp.path / "history.csv"));
    EXPECT_TRUE(fs::exists(tmp.path / "discriminator_refined.csv"));
    ASSERT_EQ(run(base + "eval", tmp.path / "log"), 0) << slurp(tmp.path / "log");
    const fhr::MetricsReport m = fhr::read_metrics(tmp.path / "metrics.csv");
    EXPECT_GT(m.fdr, 0.0);

    // Eval of the ground truth against itself is all zeros.
    ASSERT_EQ(run(base + "eval --est " + (tmp.path / "sequence" / "gt_relative.csv").string(), tmp.path / "log"), 0);
    EXPECT_EQ(fhr::read_metrics(tmp.path / "metrics.csv").hd, 0.0);
}

TEST(Cli, UndefinedMetricExitsWithTwo) {
    TempDir tmp;
    std::ofstream(tmp.path / "zero.csv") << "tx,ty,tz,rx,ry,rz\n0,0,0,0,0,0\n0,0,0,0,0,0\n";
    EXPECT_EQ(run("--out " + tmp.path.string() + " eval --gt " + (tmp.path / "zero.csv").string() + " --est " +
                      (tmp.path / "zero.csv").string(),
                  tmp.path / "log"),
              2);
}

TEST(Cli, ZeroNoiseRunStartsAtGroundTruth) {
    TempDir tmp;
    const fs::path cfg = write_config(tmp.path, "noise.bias = 0,0,0,0,0,0\nnoise.sigma = 0,0,0,0,0,0\n");
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + (tmp.path / "run").string() + " run", tmp.path / "log"), 0)
        << slurp(tmp.path / "log");
    const fs::path out = tmp.path / "run";
    for (const char* f : {"config.txt", "phantom.vol", "sequence/geometry.txt", "discriminator.csv", "initial.csv",
                          "refined.csv", "metrics_before.csv", "metrics_after.csv", "history.csv", "recon_before.vol",
                          "recon_after.vol"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_EQ(fhr::read_metrics(out / "metrics_before.csv").fdr, 0.0);
    // A two-phantom prior gives a weak critic, so refinement may wander; it must stay finite.
    const fhr::MetricsReport after = fhr::read_metrics(out / "metrics_after.csv");
    for (double x : {after.fdr, after.adr, after.md, after.sd, after.hd}) EXPECT_TRUE(std::isfinite(x));
}

TEST(Cli, RunAndBenchAreByteReproducible) {
    TempDir tmp;
    const fs::path cfg = write_config(tmp.path);
    for (const char* dir : {"a", "b"}) {
        ASSERT_EQ(run("--config " + cfg.string() + " --out " + (tmp.path / dir).string() + " run", tmp.path / "log"), 0)
            << slurp(tmp.path / "log");
        ASSERT_EQ(run("--config " + cfg.string() + " --out " + (tmp.path / dir).string() + " bench", tmp.path / "log"), 0)
            << slurp(tmp.path / "log");
    }
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(tmp.path / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), tmp.path / "a");
        ASSERT_TRUE(fs::exists(tmp.path / "b" / rel)) << rel;
        if (rel == "config.txt") continue;  // records its own output directory
        EXPECT_EQ(slurp(e.path()), slurp(tmp.path / "b" / rel)) << rel;
        ++compared;
    }
    EXPECT_GT(compared, 10u);
    const std::string summary = slurp(tmp.path / "a" / "bench_summary.csv");
    std::size_t lines = 0;
    for (char c : summary) lines += c == '\n';
    EXPECT_EQ(lines, 1u + 2u + 1u);
    EXPECT_NE(summary.find("\nmedian,"), std::string::npos);
}
