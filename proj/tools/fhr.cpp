// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
//
// fhr: command-line driver for phantom simulation, reconstruction, pose refinement,
// evaluation, gradient checks and the seeded benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fhr/config.hpp"
#include "fhr/experiment.hpp"
#include "fhr/gradcheck.hpp"
#include "fhr/io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumericalFailure = 2;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

fhr::ExperimentConfig load(const Globals& g) {
    fhr::ExperimentConfig cfg = g.config.empty() ? fhr::default_config() : fhr::load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (!g.out.empty()) cfg.out_dir = g.out;
    return cfg;
}

fs::path out_dir(const fhr::ExperimentConfig& cfg) {
    fs::path p(cfg.out_dir);
    fs::create_directories(p);
    return p;
}

void print_metrics(const char* label, const fhr::MetricsReport& m) {
    std::printf("%-8s FDR %8.3f%%  ADR %8.3f%%  MD %7.3f  SD %8.3f  HD %7.3f  final %7.3f\n", label, m.fdr, m.adr, m.md,
                m.sd, m.hd, m.final_drift);
}

fs::path or_default(const std::string& given, const fs::path& fallback) { return given.empty() ? fallback : fs::path(given); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Freehand 3D ultrasound reconstruction with test-time pose refinement"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "experiment config (section.key = value lines)");
    app.add_option("--seed", g.seed, "experiment seed (overrides experiment.seed)");
    app.add_option("--out", g.out, "output directory (overrides experiment.out)");

    auto* phantom = app.add_subcommand("phantom", "generate the seeded phantom volume");

    std::string scan_phantom_path;
    auto* scan = app.add_subcommand("scan", "simulate a scan sequence with ground-truth poses");
    scan->add_option("--phantom", scan_phantom_path, "existing phantom volume (default: generate from seed)");

    std::string est_sequence;
    auto* estimate = app.add_subcommand("estimate", "noisy relative pose estimates from the ground truth");
    estimate->add_option("--sequence", est_sequence, "sequence directory (default: OUT/sequence)");

    std::string rec_sequence, rec_poses;
    auto* reconstruct = app.add_subcommand("reconstruct", "reconstruct a volume from frames and relative poses");
    reconstruct->add_option("--sequence", rec_sequence, "sequence directory (default: OUT/sequence)");
    reconstruct->add_option("--poses", rec_poses, "relative poses CSV (default: the sequence ground truth)");

    std::string ref_sequence, ref_init, ref_disc;
    auto* refine = app.add_subcommand("refine", "test-time refinement of relative pose estimates");
    refine->add_option("--sequence", ref_sequence, "sequence directory (default: OUT/sequence)");
    refine->add_option("--init", ref_init, "initial relative poses CSV (default: OUT/initial.csv)");
    refine->add_option("--disc", ref_disc, "pretrained discriminator CSV (default: pretrain from the prior config)");

    std::string ev_gt, ev_est, ev_sequence;
    auto* eval = app.add_subcommand("eval", "drift metrics of estimated against ground-truth poses");
    eval->add_option("--gt", ev_gt, "ground-truth relative poses CSV (default: the sequence ground truth)");
    eval->add_option("--est", ev_est, "estimated relative poses CSV (default: OUT/refined.csv)");
    eval->add_option("--sequence", ev_sequence, "sequence directory (default: OUT/sequence)");

    int gc_instances = 20;
    fhr::ToyOptions gc_opt;
    auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs central-difference gradients on toy instances");
    gradcheck->add_option("--instances", gc_instances, "number of seeded toy instances")->check(CLI::PositiveNumber);
    gradcheck->add_option("--min-frames", gc_opt.min_frames);
    gradcheck->add_option("--max-frames", gc_opt.max_frames, "at most 8");
    gradcheck->add_option("--min-grid", gc_opt.min_grid);
    gradcheck->add_option("--max-grid", gc_opt.max_grid, "at most 24");

    auto* run = app.add_subcommand("run", "full seeded experiment with every artifact");
    auto* bench = app.add_subcommand("bench", "seeded multi-seed benchmark; writes bench_summary.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const fhr::ExperimentConfig cfg = load(g);

        if (phantom->parsed()) {
            const fs::path out = out_dir(cfg) / "phantom.vol";
            fhr::write_volume(out, fhr::generate_phantom(cfg.phantom, fhr::mix_seed(cfg.seed, fhr::kPhantomStream)));
            std::printf("wrote %s\n", out.string().c_str());
        } else if (scan->parsed()) {
            const fs::path out = out_dir(cfg);
            const fhr::Volume vol = scan_phantom_path.empty()
                                        ? fhr::generate_phantom(cfg.phantom, fhr::mix_seed(cfg.seed, fhr::kPhantomStream))
                                        : fhr::read_volume(scan_phantom_path);
            const fhr::Sequence seq = fhr::scan_phantom(cfg, vol);
            fhr::write_sequence(out / "sequence", seq);
            std::printf("wrote %zu frames to %s\n", seq.size(), (out / "sequence").string().c_str());
        } else if (estimate->parsed()) {
            const fs::path out = out_dir(cfg);
            const fhr::Sequence seq = fhr::read_sequence(or_default(est_sequence, out / "sequence"));
            if (!seq.ground_truth) throw fhr::IoError("sequence has no gt_relative.csv");
            fhr::write_poses(out / "initial.csv", fhr::estimate_poses(cfg, *seq.ground_truth, cfg.seed));
            std::printf("wrote %s\n", (out / "initial.csv").string().c_str());
        } else if (reconstruct->parsed()) {
            const fs::path out = out_dir(cfg);
            const fhr::Sequence seq = fhr::read_sequence(or_default(rec_sequence, out / "sequence"));
            fhr::RelativeParams rel;
            if (!rec_poses.empty()) rel = fhr::read_poses(rec_poses);
            else if (seq.ground_truth) rel = *seq.ground_truth;
            else throw fhr::IoError("no --poses given and the sequence has no ground truth");
            if (rel.size() + 1 != seq.size()) throw fhr::IoError("pose count does not match the sequence");
            const fhr::Volume v = fhr::reconstruct(seq.frames, fhr::chain_transforms(rel), cfg.recon);
            fhr::write_volume(out / "recon.vol", v);
            std::printf("wrote %s (%zu of %zu voxels valid)\n", (out / "recon.vol").string().c_str(), v.valid_count(),
                        v.values.size());
        } else if (refine->parsed()) {
            const fs::path out = out_dir(cfg);
            const fhr::Sequence seq = fhr::read_sequence(or_default(ref_sequence, out / "sequence"));
            const fhr::RelativeParams init = fhr::read_poses(or_default(ref_init, out / "initial.csv"));
            const fhr::Prior prior = fhr::build_prior(cfg);
            const fhr::DiscriminatorParams disc = ref_disc.empty() ? prior.disc : fhr::read_discriminator(ref_disc);
            if (!(disc.spec == cfg.prior.features)) throw fhr::IoError("discriminator feature spec differs from the config");
            const fhr::RefineResult r =
                fhr::online_refine(seq, init, disc, fhr::refine_config_for(cfg, cfg.seed), prior.real);
            fhr::write_poses(out / "refined.csv", r.refined);
            fhr::write_history(out / "history.csv", r.history.losses, r.history.metrics);
            fhr::write_discriminator(out / "discriminator_refined.csv", r.disc);
            const auto& last = r.history.losses.back();
            std::printf("refined %zu poses; last L_d %.6g L_g %.6g (ssl %.6g adv %.6g)\n", r.refined.size(), last.L_d,
                        last.L_g, last.ssl_term, last.adv_term);
        } else if (eval->parsed()) {
            const fs::path out = out_dir(cfg);
            fhr::RelativeParams gt;
            if (!ev_gt.empty()) {
                gt = fhr::read_poses(ev_gt);
            } else {
                const fhr::Sequence seq = fhr::read_sequence(or_default(ev_sequence, out / "sequence"));
                if (!seq.ground_truth) throw fhr::IoError("sequence has no gt_relative.csv");
                gt = *seq.ground_truth;
            }
            const fhr::RelativeParams est = fhr::read_poses(or_default(ev_est, out / "refined.csv"));
            const fhr::MetricsReport m = fhr::evaluate(gt, est, cfg.frame);
            fhr::write_metrics(out / "metrics.csv", m);
            print_metrics("metrics", m);
        } else if (gradcheck->parsed()) {
            gc_opt.validate();
            bool ok = true;
            double worst_ssl = 0.0, worst_adv = 0.0;
            for (int i = 0; i < gc_instances; ++i) {
                const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
                const fhr::ToyGradcheck t = fhr::gradcheck_toy(seed, gc_opt);
                const bool pass = t.ssl.pass() && t.adversarial.pass();
                ok = ok && pass;
                worst_ssl = std::max(worst_ssl, t.ssl.max_rel_error);
                worst_adv = std::max(worst_adv, t.adversarial.max_rel_error);
                std::printf("seed %llu  frames %zu  ssl %.3e (%zu checked)  adversarial %.3e (%zu checked)  %s\n",
                            static_cast<unsigned long long>(seed), t.instance.frames.size(), t.ssl.max_rel_error,
                            t.ssl.checked, t.adversarial.max_rel_error, t.adversarial.checked, pass ? "PASS" : "FAIL");
            }
            std::printf("ssl max rel error %.3e\nadversarial max rel error %.3e\n%s\n", worst_ssl, worst_adv,
                        ok ? "PASS" : "FAIL");
            return ok ? kOk : kNumericalFailure;
        } else if (run->parsed()) {
            const fs::path out = out_dir(cfg);
            const fhr::ExperimentResult r = fhr::run_experiment(cfg, out);
            print_metrics("before", r.before);
            print_metrics("after", r.after);
        } else if (bench->parsed()) {
            const fs::path out = out_dir(cfg);
            const fhr::BenchResult b = fhr::run_bench(cfg);
            {
                std::ofstream f = fhr::detail::open_out(out / "bench_summary.csv");
                fhr::write_bench_summary(f, b);
            }
            print_metrics("before", b.median.before);
            print_metrics("after", b.median.after);
            std::printf("median FDR reduction %.1f%%, median HD reduction %.1f%%\n", b.fdr_reduction(),
                        b.hd_reduction());
        }
    } catch (const fhr::UndefinedMetric& e) {
        std::fprintf(stderr, "fhr: %s\n", e.what());
        return kNumericalFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fhr: %s\n", e.what());
        return kUsage;
    }
    return kOk;
}
