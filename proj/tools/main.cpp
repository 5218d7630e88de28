// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Subcommands:
//
//   run         execute an experiment grid from a config file
//   merge       fine-grained merge of two checkpoints, standalone
//   importance  score skill units of a checkpoint on a generated task
//   report      print Avg/FWT/BWT for an accuracy-matrix CSV
//   gen-tasks   write a synthetic task stream to disk
//
// Exit codes: 0 success, 1 usage error, 2 data or format error,
// 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tasl/checkpoint.hpp"
#include "tasl/config.hpp"
#include "tasl/consolidation.hpp"
#include "tasl/csv.hpp"
#include "tasl/error.hpp"
#include "tasl/localization.hpp"
#include "tasl/metrics.hpp"
#include "tasl/partition.hpp"
#include "tasl/rng.hpp"
#include "tasl/run_dir.hpp"
#include "tasl/runner.hpp"
#include "tasl/tasks.hpp"

namespace {

std::vector<int> parse_order(const std::string& text) {
    std::vector<int> order;
    std::string cell;
    std::istringstream in(text);
    while (std::getline(in, cell, ',')) {
        try {
            order.push_back(std::stoi(cell));
        } catch (const std::exception&) {
            throw tasl::DataError("bad order element: '" + cell + "'");
        }
    }
    if (order.empty()) throw tasl::DataError("order must list at least one task");
    return order;
}

// Console output rounds to the default six significant digits; the CSV
// files keep full round-trip precision through format_double.
std::string fmt_metric(double value) {
    std::ostringstream out;
    out << value;
    return out.str();
}

std::string report_line(const tasl::CLReport& r) {
    std::string out = "avg=" + fmt_metric(r.avg);
    out += " fwt=" + (r.fwt ? fmt_metric(*r.fwt) : std::string("n/a"));
    out += " bwt=" + (r.bwt ? fmt_metric(*r.bwt) : std::string("n/a"));
    return out;
}

// Task picker grammar for `importance`:
//   kind[,k=N][,index=I][,seed=S][,train=N][,val=N][,test=N][,classes=C][,features=D]
struct TaskPick {
    tasl::StreamConfig stream;
    std::size_t index = 0;
    std::uint64_t seed = 1;
};

TaskPick parse_task_spec(const std::string& spec) {
    TaskPick pick;
    std::istringstream in(spec);
    std::string cell;
    bool first = true;
    while (std::getline(in, cell, ',')) {
        if (first) {
            pick.stream.kind = tasl::task_kind_from_string(cell);
            first = false;
            continue;
        }
        const std::size_t eq = cell.find('=');
        if (eq == std::string::npos)
            throw tasl::DataError("task spec entries after the kind must be key=value: " + cell);
        const std::string key = cell.substr(0, eq);
        std::uint64_t value = 0;
        try {
            value = std::stoull(cell.substr(eq + 1));
        } catch (const std::exception&) {
            throw tasl::DataError("task spec key " + key + " needs an unsigned integer");
        }
        if (key == "k") pick.stream.task_count = value;
        else if (key == "index") pick.index = value;
        else if (key == "seed") pick.seed = value;
        else if (key == "train") pick.stream.train_size = value;
        else if (key == "val") pick.stream.val_size = value;
        else if (key == "test") pick.stream.test_size = value;
        else if (key == "classes") pick.stream.classes = value;
        else if (key == "features") pick.stream.features = value;
        else throw tasl::DataError("unknown task spec key: " + key);
    }
    if (first) throw tasl::DataError("empty task spec");
    if (pick.index >= pick.stream.task_count)
        throw tasl::DataError("task spec index is out of range");
    return pick;
}

void check_arch_matches(const tasl::ArchDescriptor& arch, const tasl::TaskStream& stream) {
    using tasl::ArchKind;
    if (stream.kind == tasl::TaskKind::SlotFillToy) {
        if (arch.kind != ArchKind::TinyTransformer)
            throw tasl::DataError("architecture mismatch: a token stream needs a tiny-transformer checkpoint");
        if (arch.classes < stream.model_classes())
            throw tasl::DataError("architecture mismatch: checkpoint head covers " +
                                  std::to_string(arch.classes) + " labels, stream needs " +
                                  std::to_string(stream.model_classes()));
    } else {
        if (arch.kind != ArchKind::Mlp)
            throw tasl::DataError("architecture mismatch: a feature stream needs an mlp checkpoint");
        if (arch.layer_sizes.front() != stream.input_width())
            throw tasl::DataError("architecture mismatch: checkpoint expects " +
                                  std::to_string(arch.layer_sizes.front()) +
                                  " inputs, stream provides " +
                                  std::to_string(stream.input_width()));
        if (arch.layer_sizes.back() < stream.model_classes())
            throw tasl::DataError("architecture mismatch: checkpoint head covers " +
                                  std::to_string(arch.layer_sizes.back()) + " classes, stream needs " +
                                  std::to_string(stream.model_classes()));
    }
}

struct Cli {
    // run
    std::string run_config, run_order, run_out;
    std::uint64_t run_seed = 0;
    bool run_seed_set = false, run_order_set = false;
    // merge
    std::string merge_prev, merge_cur, merge_prev_imp, merge_cur_imp, merge_out;
    std::string merge_partition = "per-tensor";
    double merge_gamma = 0.7, merge_quantile = 0.2;
    // importance
    std::string imp_ckpt, imp_spec, imp_out;
    std::string imp_scoring = "iu", imp_partition = "per-tensor";
    std::size_t imp_steps = 300, imp_batch = 16;
    double imp_lr = 0.1, imp_alpha1 = 0.85, imp_alpha2 = 0.85, imp_quantile = 0.2;
    // report
    std::string report_matrix;
    // gen-tasks
    std::string gen_kind = "rotated-gaussians", gen_out;
    std::uint64_t gen_seed = 1;
    std::size_t gen_k = 5, gen_train = 200, gen_val = 50, gen_test = 100;
    std::size_t gen_classes = 0, gen_features = 8;
};

int cmd_run(const Cli& cli) {
    tasl::ExperimentConfig config = tasl::load_experiment_config(cli.run_config);
    if (cli.run_order_set) config.orders = {parse_order(cli.run_order)};
    if (cli.run_seed_set) config.seeds = {cli.run_seed};
    // re-validate overrides through the canonical round trip
    config = tasl::parse_experiment_config(tasl::serialize(config));

    const tasl::ExperimentResult result = tasl::run_experiment(config, cli.run_out);
    for (const tasl::RunRecord& rec : result.records)
        std::cout << tasl::run_subdir_name(rec.order_index, rec.seed) << ": "
                  << report_line(rec.report) << '\n';
    const tasl::AggregateReport& agg = result.aggregate;
    std::cout << "aggregate over " << agg.run_count << " run(s): avg="
              << fmt_metric(agg.avg.mean) << " (se " << fmt_metric(agg.avg.stderr_) << ")";
    if (agg.fwt)
        std::cout << " fwt=" << fmt_metric(agg.fwt->mean) << " (se "
                  << fmt_metric(agg.fwt->stderr_) << ")";
    if (agg.bwt)
        std::cout << " bwt=" << fmt_metric(agg.bwt->mean) << " (se "
                  << fmt_metric(agg.bwt->stderr_) << ")";
    std::cout << '\n';
    return 0;
}

int cmd_merge(const Cli& cli) {
    const tasl::Model prev = tasl::load_checkpoint(cli.merge_prev);
    const tasl::Model cur = tasl::load_checkpoint(cli.merge_cur);
    if (!prev.arch().same_shape(cur.arch()))
        throw tasl::DataError("checkpoints have different architectures");

    const tasl::SkillPartition partition =
        tasl::build_partition(prev, tasl::partition_scheme_from_string(cli.merge_partition));
    const tasl::UnitScoreMap prev_imp = tasl::read_importance_csv(cli.merge_prev_imp);
    const tasl::UnitScoreMap cur_imp = tasl::read_importance_csv(cli.merge_cur_imp);
    if (prev_imp.size() != partition.size() || cur_imp.size() != partition.size())
        throw tasl::DataError("importance maps do not match the checkpoint partition (" +
                              std::to_string(partition.size()) + " units)");

    const tasl::ImportanceFlags prev_flags = tasl::threshold(prev_imp.scores, cli.merge_quantile);
    const tasl::ImportanceFlags cur_flags = tasl::threshold(cur_imp.scores, cli.merge_quantile);
    tasl::MergeResult merged =
        tasl::merge_fine(prev, cur, partition, prev_flags, cur_flags, cli.merge_gamma);
    tasl::save_checkpoint(merged.model, cli.merge_out);

    std::filesystem::path report_path(cli.merge_out);
    report_path.replace_extension(".report.csv");
    tasl::write_merge_report_csv(report_path, merged.report);

    std::size_t cases[4] = {0, 0, 0, 0};
    for (const tasl::MergeCaseRow& row : merged.report)
        ++cases[static_cast<int>(row.merge_case) - 1];
    std::cout << "merged " << partition.size() << " units: blend=" << cases[0]
              << " keep-prev=" << cases[1] << " take-cur=" << cases[2] << " average=" << cases[3]
              << '\n';
    std::cout << "wrote " << cli.merge_out << " and " << report_path.string() << '\n';
    return 0;
}

int cmd_importance(const Cli& cli) {
    tasl::Model model = tasl::load_checkpoint(cli.imp_ckpt);
    const TaskPick pick = parse_task_spec(cli.imp_spec);
    const tasl::TaskStream stream = tasl::gen_stream(pick.stream, pick.seed);
    check_arch_matches(model.arch(), stream);

    const tasl::SkillPartition partition =
        tasl::build_partition(model, tasl::partition_scheme_from_string(cli.imp_partition));
    tasl::LocalizationParams params;
    params.steps = cli.imp_steps;
    params.batch_size = cli.imp_batch;
    params.lr = cli.imp_lr;
    params.alpha1 = cli.imp_alpha1;
    params.alpha2 = cli.imp_alpha2;
    params.variant = tasl::score_variant_from_string(cli.imp_scoring);

    tasl::rng::Engine batch_rng = tasl::rng::engine(pick.seed, "batch", pick.index);
    const tasl::LocalizationResult loc = tasl::run_localization(
        std::move(model), stream.tasks[pick.index].train, params, partition, batch_rng);

    const tasl::UnitScoreMap normalized = tasl::normalize(loc.scores);
    const tasl::ImportanceFlags flags = tasl::threshold(loc.scores.scores, cli.imp_quantile);
    tasl::write_importance_csv(cli.imp_out, partition, loc.scores, normalized, flags);

    std::cout << "scored " << partition.size() << " units on task " << pick.index << " ("
              << tasl::to_string(pick.stream.kind) << "), " << flags.count()
              << " flagged important\n";
    std::cout << "wrote " << cli.imp_out << '\n';
    return 0;
}

int cmd_report(const Cli& cli) {
    const tasl::AccuracyMatrix matrix = tasl::read_matrix_csv(cli.report_matrix);
    const tasl::CLReport report = tasl::cl_metrics(matrix);
    std::cout << "Avg=" << fmt_metric(report.avg);
    std::cout << " FWT=" << (report.fwt ? fmt_metric(*report.fwt) : std::string("n/a"));
    std::cout << " BWT=" << (report.bwt ? fmt_metric(*report.bwt) : std::string("n/a"));
    std::cout << '\n';
    return 0;
}

int cmd_gen_tasks(const Cli& cli) {
    tasl::StreamConfig config;
    config.kind = tasl::task_kind_from_string(cli.gen_kind);
    config.task_count = cli.gen_k;
    config.train_size = cli.gen_train;
    config.val_size = cli.gen_val;
    config.test_size = cli.gen_test;
    config.classes = cli.gen_classes;
    config.features = cli.gen_features;
    const tasl::TaskStream stream = tasl::gen_stream(config, cli.gen_seed);
    tasl::write_stream_dir(cli.gen_out, stream);
    std::cout << "wrote " << stream.size() << " tasks to " << cli.gen_out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skill-unit continual learning experiments"};
    app.require_subcommand(1);
    Cli cli;

    CLI::App* run = app.add_subcommand("run", "Execute an experiment grid from a config file");
    run->add_option("--config", cli.run_config, "Experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--order", cli.run_order, "Override: single visit order, e.g. 2,0,1")
        ->each([&cli](const std::string&) { cli.run_order_set = true; });
    run->add_option("--seed", cli.run_seed, "Override: single seed")
        ->each([&cli](const std::string&) { cli.run_seed_set = true; });
    run->add_option("--out", cli.run_out, "Output directory")->required();

    CLI::App* merge = app.add_subcommand("merge", "Fine-grained merge of two checkpoints");
    merge->add_option("--prev", cli.merge_prev, "Accumulated checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    merge->add_option("--cur", cli.merge_cur, "Current-task checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    merge->add_option("--prev-imp", cli.merge_prev_imp, "Importance CSV for --prev")
        ->required()
        ->check(CLI::ExistingFile);
    merge->add_option("--cur-imp", cli.merge_cur_imp, "Importance CSV for --cur")
        ->required()
        ->check(CLI::ExistingFile);
    merge->add_option("--gamma", cli.merge_gamma, "Blend weight when both sides are important");
    merge->add_option("--quantile", cli.merge_quantile, "Important fraction of units");
    merge->add_option("--partition", cli.merge_partition, "per-tensor or per-layer-group");
    merge->add_option("--out", cli.merge_out, "Merged checkpoint path")->required();

    CLI::App* importance = app.add_subcommand("importance", "Score skill units on one task");
    importance->add_option("--ckpt", cli.imp_ckpt, "Model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    importance
        ->add_option("--task", cli.imp_spec,
                     "Task spec: kind[,k=N][,index=I][,seed=S][,train=N][,classes=C][,features=D]")
        ->required();
    importance->add_option("--steps", cli.imp_steps, "Fine-tuning steps");
    importance->add_option("--batch-size", cli.imp_batch, "Minibatch size");
    importance->add_option("--lr", cli.imp_lr, "Learning rate");
    importance->add_option("--alpha1", cli.imp_alpha1, "Sensitivity smoothing");
    importance->add_option("--alpha2", cli.imp_alpha2, "Uncertainty smoothing");
    importance->add_option("--quantile", cli.imp_quantile, "Important fraction of units");
    importance->add_option("--scoring", cli.imp_scoring, "iu, sensitivity-only, or grad-only");
    importance->add_option("--partition", cli.imp_partition, "per-tensor or per-layer-group");
    importance->add_option("--out", cli.imp_out, "Importance CSV path")->required();

    CLI::App* report = app.add_subcommand("report", "Metrics for an accuracy-matrix CSV");
    report->add_option("--matrix", cli.report_matrix, "Accuracy matrix CSV")
        ->required()
        ->check(CLI::ExistingFile);

    CLI::App* gen = app.add_subcommand("gen-tasks", "Write a synthetic task stream");
    gen->add_option("--kind", cli.gen_kind,
                    "rotated-gaussians, permuted-features, or slot-fill-toy");
    gen->add_option("--k", cli.gen_k, "Number of tasks");
    gen->add_option("--seed", cli.gen_seed, "Stream seed");
    gen->add_option("--train", cli.gen_train, "Training rows per task");
    gen->add_option("--val", cli.gen_val, "Validation rows per task");
    gen->add_option("--test", cli.gen_test, "Test rows per task");
    gen->add_option("--classes", cli.gen_classes, "Class count (0 = kind default)");
    gen->add_option("--features", cli.gen_features, "Feature count (permuted-features)");
    gen->add_option("--out", cli.gen_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(cli);
        if (merge->parsed()) return cmd_merge(cli);
        if (importance->parsed()) return cmd_importance(cli);
        if (report->parsed()) return cmd_report(cli);
        if (gen->parsed()) return cmd_gen_tasks(cli);
    } catch (const tasl::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const tasl::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
