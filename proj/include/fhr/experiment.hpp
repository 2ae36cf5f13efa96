// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fhr/config.hpp"
#include "fhr/io.hpp"
#include "fhr/metrics.hpp"
#include "fhr/phantom.hpp"
#include "fhr/recon.hpp"
#include "fhr/refine.hpp"
#include "fhr/scansim.hpp"

namespace fhr {

/// splitmix64 finaliser; derives independent streams from one experiment seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t { kPhantomStream = 1, kNoiseStream = 2, kRefineStream = 3, kPretrainStream = 4 };

struct Scenario {
    Volume phantom;
    Sequence sequence;  // carries the ground truth
    RelativeParams init;
};

inline Sequence scan_phantom(const ExperimentConfig& cfg, const Volume& phantom) {
    return simulate_scan(phantom, generate_trajectory(cfg.trajectory), cfg.frame, cfg.start);
}

inline RelativeParams estimate_poses(const ExperimentConfig& cfg, const RelativeParams& gt, std::uint64_t seed) {
    NoiseModel nm = cfg.noise;
    nm.seed = mix_seed(seed, kNoiseStream);
    return perturb_estimates(gt, nm);
}

inline Scenario make_scenario(const ExperimentConfig& cfg, std::uint64_t seed) {
    Scenario s;
    s.phantom = generate_phantom(cfg.phantom, mix_seed(seed, kPhantomStream));
    s.sequence = scan_phantom(cfg, s.phantom);
    s.init = estimate_poses(cfg, *s.sequence.ground_truth, seed);
    return s;
}

struct Prior {
    DiscriminatorParams disc;
    std::vector<Volume> real;
    std::vector<Volume> fake;
    double accuracy = 0.0;  // on its own training pools
};

/// Real pool: ground-truth reconstructions of training phantoms; fake pool: reconstructions
/// at noisy estimates. Training seeds come from prior.seed, never from the experiment seed.
inline Prior build_prior(const ExperimentConfig& cfg) {
    cfg.validate();
    Prior p;
    for (int k = 0; k < cfg.prior.train_phantoms; ++k) {
        const std::uint64_t s = cfg.prior.seed + static_cast<std::uint64_t>(k);
        const Volume phantom = generate_phantom(cfg.phantom, mix_seed(s, kPhantomStream));
        const Sequence seq = scan_phantom(cfg, phantom);
        p.real.push_back(reconstruct(seq.frames, chain_transforms(*seq.ground_truth), cfg.recon));
        for (int r = 0; r < cfg.prior.fakes_per_phantom; ++r) {
            const RelativeParams est = estimate_poses(cfg, *seq.ground_truth, mix_seed(s, 100 + static_cast<std::uint64_t>(r)));
            p.fake.push_back(reconstruct(seq.frames, chain_transforms(est), cfg.recon));
        }
    }
    p.disc = disc_pretrain(p.real, p.fake, mix_seed(cfg.prior.seed, kPretrainStream), cfg.prior.features);
    p.accuracy = disc_accuracy(p.real, p.fake, p.disc);
    return p;
}

inline RefineConfig refine_config_for(const ExperimentConfig& cfg, std::uint64_t seed) {
    RefineConfig r = cfg.refine;
    r.recon = cfg.recon;
    r.seed = mix_seed(seed, kRefineStream);
    return r;
}

struct ExperimentResult {
    MetricsReport before;
    MetricsReport after;
    RefineResult refine;
};

/// One seeded run. Writes into `out`: config.txt, phantom.vol, sequence/, discriminator.csv,
/// initial.csv, refined.csv, metrics_before.csv, metrics_after.csv, history.csv,
/// recon_before.vol and recon_after.vol.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    std::filesystem::create_directories(out);
    const Scenario sc = make_scenario(cfg, cfg.seed);
    const Prior prior = build_prior(cfg);
    const RelativeParams& gt = *sc.sequence.ground_truth;

    ExperimentResult res;
    res.refine = online_refine(sc.sequence, sc.init, prior.disc, refine_config_for(cfg, cfg.seed), prior.real);
    res.before = evaluate(gt, sc.init, cfg.frame);
    res.after = evaluate(gt, res.refine.refined, cfg.frame);

    {
        std::ofstream f = detail::open_out(out / "config.txt");
        f << serialize_config(cfg);
    }
    write_volume(out / "phantom.vol", sc.phantom);
    write_sequence(out / "sequence", sc.sequence);
    write_discriminator(out / "discriminator.csv", prior.disc);
    write_poses(out / "initial.csv", sc.init);
    write_poses(out / "refined.csv", res.refine.refined);
    write_metrics(out / "metrics_before.csv", res.before);
    write_metrics(out / "metrics_after.csv", res.after);
    write_history(out / "history.csv", res.refine.history.losses, res.refine.history.metrics);
    write_volume(out / "recon_before.vol", reconstruct(sc.sequence.frames, chain_transforms(sc.init), cfg.recon));
    write_volume(out / "recon_after.vol",
                 reconstruct(sc.sequence.frames, chain_transforms(res.refine.refined), cfg.recon));
    return res;
}

struct BenchRow {
    std::uint64_t seed = 0;
    MetricsReport before;
    MetricsReport after;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    BenchRow median;  // seed unused
    double prior_accuracy = 0.0;

    /// Relative reduction of the median, in percent (positive means refinement helped).
    double fdr_reduction() const { return 100.0 * (1.0 - median.after.fdr / median.before.fdr); }
    double hd_reduction() const { return 100.0 * (1.0 - median.after.hd / median.before.hd); }
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {

inline MetricsReport median_report(const std::vector<BenchRow>& rows, bool after) {
    auto col = [&](double MetricsReport::*field) {
        std::vector<double> v;
        for (const BenchRow& r : rows) v.push_back((after ? r.after : r.before).*field);
        return median_of(v);
    };
    MetricsReport m;
    m.final_drift = col(&MetricsReport::final_drift);
    m.fdr = col(&MetricsReport::fdr);
    m.adr = col(&MetricsReport::adr);
    m.md = col(&MetricsReport::md);
    m.sd = col(&MetricsReport::sd);
    m.hd = col(&MetricsReport::hd);
    return m;
}

}  // namespace detail

inline const char* bench_header() {
    return "seed,fdr_before,adr_before,md_before,sd_before,hd_before,final_drift_before,"
           "fdr_after,adr_after,md_after,sd_after,hd_after,final_drift_after";
}

inline void write_bench_summary(std::ostream& os, const BenchResult& b) {
    os << bench_header() << '\n';
    for (const BenchRow& r : b.rows) os << r.seed << ',' << metrics_row(r.before) << ',' << metrics_row(r.after) << '\n';
    os << "median," << metrics_row(b.median.before) << ',' << metrics_row(b.median.after) << '\n';
}

/// Seeds cfg.seed .. cfg.seed + bench_seeds - 1 share one pretrained discriminator.
inline BenchResult run_bench(const ExperimentConfig& cfg) {
    cfg.validate();
    const Prior prior = build_prior(cfg);
    BenchResult b;
    b.prior_accuracy = prior.accuracy;
    for (int i = 0; i < cfg.bench_seeds; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        const Scenario sc = make_scenario(cfg, seed);
        const RefineResult r = online_refine(sc.sequence, sc.init, prior.disc, refine_config_for(cfg, seed), prior.real);
        const RelativeParams& gt = *sc.sequence.ground_truth;
        b.rows.push_back({seed, evaluate(gt, sc.init, cfg.frame), evaluate(gt, r.refined, cfg.frame)});
    }
    b.median.before = detail::median_report(b.rows, false);
    b.median.after = detail::median_report(b.rows, true);
    return b;
}

}  // namespace fhr
