// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Release gate. Eleven checks, one PASS/FAIL line each, exit 0 only if all
// pass. The directional checks (6-9) share one experiment grid: a 5-task
// rotated-gaussians stream, seeds 1-5, three visit orders, 300 steps per
// task, library defaults otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tasl/checkpoint.hpp"
#include "tasl/config.hpp"
#include "tasl/consolidation.hpp"
#include "tasl/localization.hpp"
#include "tasl/metrics.hpp"
#include "tasl/model.hpp"
#include "tasl/partition.hpp"
#include "tasl/rng.hpp"
#include "tasl/run_dir.hpp"
#include "tasl/runner.hpp"
#include "tasl/tasks.hpp"

using namespace tasl;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int criterion, const char* label, bool ok, const std::string& detail) {
    std::printf("%s  %2d  %s: %s\n", ok ? "PASS" : "FAIL", criterion, label, detail.c_str());
    if (!ok) ++failures;
}

void failed(int criterion, const char* label, const std::exception& e) {
    verdict(criterion, label, false, std::string("unexpected error: ") + e.what());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Model random_model(rng::Engine& g, bool transformer) {
    ArchDescriptor arch;
    arch.seed = rng::index(g, 1u << 20);
    if (transformer) {
        arch.kind = ArchKind::TinyTransformer;
        arch.d_model = 4;
        arch.heads = 2;
        arch.ff_dim = 8;
        arch.blocks = 1;
        arch.classes = 7;
    } else {
        arch.kind = ArchKind::Mlp;
        arch.layer_sizes = {2 + rng::index(g, 3), 3 + rng::index(g, 5), 2 + rng::index(g, 3)};
    }
    return Model(arch);
}

Batch random_batch(rng::Engine& g, const ArchDescriptor& arch) {
    Batch b;
    b.rows = 4 + rng::index(g, 4);
    if (arch.kind == ArchKind::Mlp) {
        b.cols = arch.layer_sizes.front();
        b.features.resize(b.rows * b.cols);
        for (double& f : b.features) f = rng::normal(g);
        b.targets.resize(b.rows);
        for (int& t : b.targets)
            t = static_cast<int>(rng::index(g, arch.layer_sizes.back()));
    } else {
        b.cols = 5;
        b.tokens.resize(b.rows * b.cols);
        b.targets.resize(b.rows * b.cols);
        for (int& t : b.tokens) t = static_cast<int>(rng::index(g, arch.classes));
        for (int& t : b.targets) t = static_cast<int>(rng::index(g, arch.classes));
    }
    return b;
}

// ---- 1: unit scores vs brute-force per-parameter means --------------------

void criterion_unit_scores() {
    const char* label = "unit scores equal brute-force means";
    try {
        const auto t0 = std::chrono::steady_clock::now();
        rng::Engine g = rng::engine(1001, "acceptance-units");
        double worst = 0.0;
        for (int instance = 0; instance < 50; ++instance) {
            Model model = random_model(g, instance % 5 == 4);
            const Batch batch = random_batch(g, model.arch());
            ImportanceState state(model.param_count(), 0.85, 0.85);
            for (int step = 0; step < 3; ++step) {
                model.forward_loss(batch);
                model.backward();
                state.update(model);
                model.sgd_step(0.05);
            }
            const SkillPartition partition = build_partition(
                model, instance % 2 ? PartitionScheme::PerLayerGroup : PartitionScheme::PerTensor);
            const UnitScoreMap scores = unit_scores(state, partition, model);

            const std::vector<double> s = state.param_scores();
            for (std::size_t u = 0; u < partition.size(); ++u) {
                double sum = 0.0;
                std::size_t count = 0;
                for (const std::string& name : partition.units[u].member_tensors) {
                    const std::size_t idx = model.tensor_index(name);
                    const std::size_t off = model.tensor_offset(idx);
                    for (std::size_t i = 0; i < model.tensors()[idx].size(); ++i) sum += s[off + i];
                    count += model.tensors()[idx].size();
                }
                worst = std::max(worst,
                                 std::abs(scores.scores[u] - sum / static_cast<double>(count)));
            }
        }
        const double elapsed = seconds_since(t0);
        verdict(1, label, worst <= 1e-12 && elapsed < 5.0,
                "max deviation " + fmt(worst) + " over 50 instances in " + fmt(elapsed) + " s");
    } catch (const std::exception& e) {
        failed(1, label, e);
    }
}

// ---- 2: smoothing recurrences vs an unrolled oracle ------------------------

void criterion_ema_unroll() {
    const char* label = "importance smoothing matches unrolled oracle";
    try {
        rng::Engine g = rng::engine(1002, "acceptance-ema");
        double worst = 0.0;
        for (int script = 0; script < 10; ++script) {
            const double a1 = 0.5 + 0.05 * script;
            const double a2 = 0.95 - 0.05 * script;
            const std::size_t n = 5;
            ImportanceState state(n, a1, a2);
            std::vector<double> ibar(n, 0.0), ubar(n, 0.0);
            for (int t = 0; t < 100; ++t) {
                std::vector<double> w(n), gr(n);
                for (std::size_t i = 0; i < n; ++i) {
                    w[i] = rng::normal(g);
                    gr[i] = rng::normal(g);
                }
                state.update(w, gr);
                for (std::size_t i = 0; i < n; ++i) {
                    const double inst = std::abs(w[i] * gr[i]);
                    ibar[i] = a1 * ibar[i] + (1.0 - a1) * inst;
                    ubar[i] = a2 * ubar[i] + (1.0 - a2) * std::abs(inst - ibar[i]);
                    worst = std::max(worst, std::abs(state.smoothed()[i] - ibar[i]));
                    worst = std::max(worst, std::abs(state.uncertainty()[i] - ubar[i]));
                }
            }
        }
        verdict(2, label, worst <= 1e-12,
                "max deviation " + fmt(worst) + " over 10 scripts of length 100");
    } catch (const std::exception& e) {
        failed(2, label, e);
    }
}

// ---- 3: gradients vs central finite differences ----------------------------

double fd_check(Model model, const Batch& batch) {
    model.forward_loss(batch);
    model.backward();
    std::vector<std::vector<double>> ad;
    for (const ParamTensor& t : model.tensors()) ad.push_back(t.grad);

    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t ti = 0; ti < model.tensors().size(); ++ti) {
        ParamTensor& t = model.tensors()[ti];
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double orig = t.values[i];
            t.values[i] = orig + eps;
            const double up = model.forward_loss(batch);
            t.values[i] = orig - eps;
            const double down = model.forward_loss(batch);
            t.values[i] = orig;
            const double fd = (up - down) / (2.0 * eps);
            // the 1e-4 floor turns near-zero-gradient entries into an
            // absolute comparison at 1e-9, below fd noise
            const double denom = std::max({std::abs(ad[ti][i]), std::abs(fd), 1e-4});
            worst = std::max(worst, std::abs(ad[ti][i] - fd) / denom);
        }
    }
    return worst;
}

void criterion_gradients() {
    const char* label = "gradients match finite differences";
    try {
        rng::Engine g = rng::engine(1003, "acceptance-fd");
        double worst = 0.0;
        for (int i = 0; i < 3; ++i) {
            const Model mlp = random_model(g, false);
            worst = std::max(worst, fd_check(mlp, random_batch(g, mlp.arch())));
        }
        for (int i = 0; i < 2; ++i) {
            const Model tf = random_model(g, true);
            worst = std::max(worst, fd_check(tf, random_batch(g, tf.arch())));
        }
        verdict(3, label, worst < 1e-5, "max relative error " + fmt(worst) + " (limit 1e-5)");
    } catch (const std::exception& e) {
        failed(3, label, e);
    }
}

// ---- 4: the four merge rules and the coarse-merge coincidence --------------

void criterion_merge_semantics() {
    const char* label = "merge rules keep/take/blend/average correctly";
    try {
        ArchDescriptor arch;
        arch.kind = ArchKind::Mlp;
        arch.layer_sizes = {3, 4, 2};
        arch.seed = 71;
        const Model prev(arch);
        arch.seed = 72;
        const Model cur(arch);
        const SkillPartition partition = build_partition(prev, PartitionScheme::PerTensor);

        ImportanceFlags pf, cf;
        pf.flags = {true, true, false, false};
        cf.flags = {true, false, true, false};
        const double gamma = 0.7;
        const MergeResult fine = merge_fine(prev, cur, partition, pf, cf, gamma);

        bool ok = true;
        for (std::size_t u = 0; u < 4; ++u) {
            const std::size_t ti = prev.tensor_index(partition.units[u].member_tensors.front());
            const auto& out = fine.model.tensors()[ti].values;
            const auto& p = prev.tensors()[ti].values;
            const auto& c = cur.tensors()[ti].values;
            for (std::size_t i = 0; i < out.size(); ++i) {
                switch (u) {
                    case 0: ok = ok && out[i] == gamma * p[i] + (1.0 - gamma) * c[i]; break;
                    case 1: ok = ok && out[i] == p[i]; break;
                    case 2: ok = ok && out[i] == c[i]; break;
                    case 3: ok = ok && out[i] == 0.5 * (p[i] + c[i]); break;
                }
            }
        }

        ImportanceFlags all;
        all.flags.assign(4, true);
        const MergeResult blended = merge_fine(prev, cur, partition, all, all, gamma);
        const Model coarse = merge_coarse(prev, cur, gamma);
        double worst = 0.0;
        for (std::size_t t = 0; t < coarse.tensors().size(); ++t)
            for (std::size_t i = 0; i < coarse.tensors()[t].values.size(); ++i)
                worst = std::max(worst, std::abs(blended.model.tensors()[t].values[i] -
                                                 coarse.tensors()[t].values[i]));
        verdict(4, label, ok && worst <= 1e-12,
                std::string("four rules ") + (ok ? "exact" : "WRONG") +
                    ", fine-vs-coarse deviation " + fmt(worst));
    } catch (const std::exception& e) {
        failed(4, label, e);
    }
}

// ---- 5: metric formulas on hand-checked matrices ---------------------------

void criterion_metrics() {
    const char* label = "metrics match hand-computed values";
    try {
        AccuracyMatrix m(3);
        m.cells = {0.9, 0.2, 0.1, 0.7, 0.8, 0.3, 0.5, 0.6, 0.7};
        const CLReport r = cl_metrics(m);
        const double dev = std::max({std::abs(r.avg - 0.6), std::abs(*r.fwt - 0.25),
                                     std::abs(*r.bwt - (-0.3))});

        AccuracyMatrix ones(4);
        ones.cells.assign(16, 1.0);
        const CLReport u = cl_metrics(ones);
        const bool ones_ok = u.avg == 1.0 && *u.fwt == 1.0 && *u.bwt == 0.0;
        verdict(5, label, dev <= 1e-12 && ones_ok,
                "hand matrix deviation " + fmt(dev) + ", all-ones " +
                    (ones_ok ? "(1,1,0) exact" : "WRONG"));
    } catch (const std::exception& e) {
        failed(5, label, e);
    }
}

// ---- 6-9: the shared directional grid --------------------------------------

struct GridStats {
    std::vector<double> avgs, bwts, declines;

    double mean_avg() const { return mean(avgs); }
    double mean_bwt() const { return mean(bwts); }
    double mean_decline() const { return mean(declines); }

    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }
};

std::map<std::string, GridStats> run_grid(double& elapsed) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::vector<int>> orders = {
        {0, 1, 2, 3, 4}, {4, 3, 2, 1, 0}, {2, 0, 4, 1, 3}};
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

    struct Variant {
        const char* name;
        Method method;
        ScoreVariant scoring;
    };
    const std::vector<Variant> variants = {
        {"tasl", Method::Tasl, ScoreVariant::SmoothedTimesUncertainty},
        {"grad-only", Method::Tasl, ScoreVariant::GradMagnitude},
        {"finetune", Method::Finetune, ScoreVariant::SmoothedTimesUncertainty},
        {"weight-ensemble", Method::WeightEnsemble, ScoreVariant::SmoothedTimesUncertainty},
        {"ema", Method::Ema, ScoreVariant::SmoothedTimesUncertainty},
    };

    std::map<std::string, GridStats> stats;
    StreamConfig stream_cfg;  // 5-task rotated-gaussians defaults
    for (std::uint64_t seed : seeds) {
        const TaskStream base = gen_stream(stream_cfg, seed);
        for (const std::vector<int>& order : orders) {
            const TaskStream stream = reorder(base, order);
            for (const Variant& v : variants) {
                RunConfig rc;  // alpha 0.85, beta/gamma 0.7, quantile 0.2, T=300
                rc.method = v.method;
                rc.scoring = v.scoring;
                rc.seed = seed;
                const RunResult r = run(stream, rc);
                GridStats& s = stats[v.name];
                s.avgs.push_back(r.report.avg);
                s.bwts.push_back(*r.report.bwt);
                const std::vector<double> traj = first_task_trajectory(r.matrix);
                s.declines.push_back(traj.front() - traj.back());
            }
        }
    }
    elapsed = seconds_since(t0);
    return stats;
}

void criteria_directional() {
    const char* l6 = "skill merging beats finetuning on forgetting";
    const char* l7 = "smoothed-times-uncertainty scoring beats grad-only";
    const char* l8 = "fine-grained merging beats coarse baselines";
    const char* l9 = "first-task decline at most half of finetuning's";
    try {
        double elapsed = 0.0;
        const std::map<std::string, GridStats> stats = run_grid(elapsed);
        const GridStats& tasl = stats.at("tasl");
        const GridStats& fine = stats.at("finetune");
        const GridStats& grad = stats.at("grad-only");
        const GridStats& ens = stats.at("weight-ensemble");
        const GridStats& ema = stats.at("ema");

        verdict(6, l6,
                tasl.mean_bwt() >= fine.mean_bwt() + 0.05 &&
                    tasl.mean_avg() > fine.mean_avg() && elapsed < 600.0,
                "bwt " + fmt(tasl.mean_bwt()) + " vs " + fmt(fine.mean_bwt()) + " (need +0.05)" +
                    ", avg " + fmt(tasl.mean_avg()) + " vs " + fmt(fine.mean_avg()) +
                    ", grid took " + fmt(elapsed) + " s");
        verdict(7, l7, tasl.mean_avg() >= grad.mean_avg(),
                "avg " + fmt(tasl.mean_avg()) + " vs " + fmt(grad.mean_avg()));
        verdict(8, l8,
                tasl.mean_avg() >= ens.mean_avg() && tasl.mean_avg() >= ema.mean_avg(),
                "avg " + fmt(tasl.mean_avg()) + " vs ensemble " + fmt(ens.mean_avg()) +
                    " and ema " + fmt(ema.mean_avg()));
        verdict(9, l9, tasl.mean_decline() <= 0.5 * fine.mean_decline(),
                "decline " + fmt(tasl.mean_decline()) + " vs " + fmt(fine.mean_decline()) +
                    " (limit half)");
    } catch (const std::exception& e) {
        failed(6, l6, e);
        failed(7, l7, e);
        failed(8, l8, e);
        failed(9, l9, e);
    }
}

// ---- 10: thresholding count and affine invariance ---------------------------

void criterion_thresholding() {
    const char* label = "flag counts and affine invariance";
    try {
        rng::Engine g = rng::engine(1010, "acceptance-threshold");
        bool counts_ok = true;
        bool affine_ok = true;
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t n = 2 + rng::index(g, 40);
            std::vector<double> x(n);
            for (double& v : x) v = rng::normal(g);
            const ImportanceFlags f = threshold(x, 0.2);
            const auto want = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n)));
            counts_ok = counts_ok && f.count() == want;

            const double a = 0.1 + 5.0 * rng::unit(g);
            const double b = 10.0 * rng::normal(g);
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
            affine_ok = affine_ok && threshold(y, 0.2).flags == f.flags;
        }

        // flags emitted by a real run obey the same count
        StreamConfig sc;
        sc.task_count = 2;
        sc.train_size = 40;
        sc.val_size = 10;
        sc.test_size = 20;
        RunConfig rc;
        rc.steps_per_task = 50;
        const RunResult r = run(gen_stream(sc, 3), rc);
        const auto want = static_cast<std::size_t>(
            std::ceil(0.2 * static_cast<double>(r.partition.size())));
        bool run_ok = true;
        for (const TaskArtifacts& art : r.artifacts) run_ok = run_ok && art.flags.count() == want;

        verdict(10, label, counts_ok && affine_ok && run_ok,
                std::string("ceil(0.2n) counts ") + (counts_ok && run_ok ? "exact" : "WRONG") +
                    ", affine rescaling " + (affine_ok ? "invariant" : "NOT invariant"));
    } catch (const std::exception& e) {
        failed(10, label, e);
    }
}

// ---- 11: persistence --------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void criterion_persistence() {
    const char* label = "checkpoints and experiment dirs reproduce";
    try {
        const fs::path tmp = "acceptance_tmp";
        fs::remove_all(tmp);
        fs::create_directories(tmp);

        bool ckpt_ok = true;
        rng::Engine g = rng::engine(1011, "acceptance-persist");
        for (int i = 0; i < 2; ++i) {
            const Model model = random_model(g, i == 1);
            save_checkpoint(model, tmp / "a.ckpt");
            save_checkpoint(load_checkpoint(tmp / "a.ckpt"), tmp / "b.ckpt");
            ckpt_ok = ckpt_ok && slurp(tmp / "a.ckpt") == slurp(tmp / "b.ckpt");
        }

        const ExperimentConfig cfg = parse_experiment_config(
            "tasks = 3\ntrain_size = 60\nval_size = 10\ntest_size = 40\n"
            "steps_per_task = 100\nhidden_sizes = 16\nseeds = 1,2\n");
        run_experiment(cfg, tmp / "out1");
        run_experiment(load_experiment_config(tmp / "out1" / "config.ini"), tmp / "out2");

        bool rerun_ok = true;
        std::size_t files = 0;
        for (auto it = fs::recursive_directory_iterator(tmp / "out1");
             it != fs::recursive_directory_iterator(); ++it) {
            if (!it->is_regular_file()) continue;
            ++files;
            const fs::path rel = fs::relative(it->path(), tmp / "out1");
            rerun_ok = rerun_ok && fs::exists(tmp / "out2" / rel) &&
                       slurp(it->path()) == slurp(tmp / "out2" / rel);
        }
        fs::remove_all(tmp);
        verdict(11, label, ckpt_ok && rerun_ok && files > 0,
                std::string("checkpoint roundtrip ") + (ckpt_ok ? "byte-identical" : "DIFFERS") +
                    ", rerun reproduced " + std::to_string(files) + " files " +
                    (rerun_ok ? "byte-identically" : "with DIFFERENCES"));
    } catch (const std::exception& e) {
        failed(11, label, e);
    }
}

} // namespace

int main() {
    criterion_unit_scores();
    criterion_ema_unroll();
    criterion_gradients();
    criterion_merge_semantics();
    criterion_metrics();
    criteria_directional();
    criterion_thresholding();
    criterion_persistence();
    if (failures) std::printf("%d of 11 criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
