// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/run_dir.hpp"

#include <fstream>

#include <json.hpp>

#include "tasl/checkpoint.hpp"
#include "tasl/error.hpp"

namespace tasl {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot open for writing: " + path.string());
    file << text;
    if (!file) throw DataError("failed writing: " + path.string());
}

std::string feature_csv(const Batch& batch) {
    std::string out;
    if (batch.token_input()) {
        for (std::size_t c = 0; c < batch.cols; ++c) out += "t" + std::to_string(c) + ",";
        for (std::size_t c = 0; c < batch.cols; ++c)
            out += "l" + std::to_string(c) + (c + 1 < batch.cols ? "," : "");
        out += '\n';
        for (std::size_t r = 0; r < batch.rows; ++r) {
            for (std::size_t c = 0; c < batch.cols; ++c)
                out += std::to_string(batch.tokens[r * batch.cols + c]) + ",";
            for (std::size_t c = 0; c < batch.cols; ++c)
                out += std::to_string(batch.targets[r * batch.cols + c]) +
                       (c + 1 < batch.cols ? "," : "");
            out += '\n';
        }
    } else {
        for (std::size_t c = 0; c < batch.cols; ++c) out += "f" + std::to_string(c) + ",";
        out += "label\n";
        for (std::size_t r = 0; r < batch.rows; ++r) {
            for (std::size_t c = 0; c < batch.cols; ++c)
                out += format_double(batch.features[r * batch.cols + c]) + ",";
            out += std::to_string(batch.targets[r]) + '\n';
        }
    }
    return out;
}

} // namespace

std::string run_subdir_name(std::size_t order_index, std::uint64_t seed) {
    return "run_o" + std::to_string(order_index) + "_s" + std::to_string(seed);
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& result) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(dir / "matrix.csv", result.matrix);
    write_metrics_csv(dir / "metrics.csv", result.report);
    const std::vector<double> trajectory = first_task_trajectory(result.matrix);
    write_trajectory_csv(dir / "task1_trajectory.csv", trajectory);
    write_partition_csv(dir / "partition.csv", result.partition);
    for (std::size_t k = 0; k < result.artifacts.size(); ++k) {
        const TaskArtifacts& art = result.artifacts[k];
        write_importance_csv(dir / ("importance_task" + std::to_string(k + 1) + ".csv"),
                             result.partition, art.raw, art.normalized, art.flags);
        if (!art.merge_report.empty())
            write_merge_report_csv(dir / ("merge_task" + std::to_string(k + 1) + ".csv"),
                                   art.merge_report);
    }
    save_checkpoint(result.final_model, dir / "model.ckpt");
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "config.ini", serialize(config));

    ExperimentResult result;
    std::vector<CLReport> reports;
    for (std::size_t oi = 0; oi < config.orders.size(); ++oi) {
        for (std::uint64_t seed : config.seeds) {
            const TaskStream base = gen_stream(config.stream, seed);
            const TaskStream stream = reorder(base, config.orders[oi]);
            RunConfig rc = config.run;
            rc.seed = seed;
            RunResult run_result = run(stream, rc);
            write_run_outputs(out_dir / run_subdir_name(oi, seed), run_result);
            result.records.push_back({oi, config.orders[oi], seed, run_result.report});
            reports.push_back(run_result.report);
        }
    }
    result.aggregate = aggregate(reports);
    write_runs_csv(out_dir / "runs.csv", result.records);
    write_aggregate_csv(out_dir / "aggregate.csv", result.aggregate);
    return result;
}

void write_stream_dir(const std::filesystem::path& dir, const TaskStream& stream) {
    std::filesystem::create_directories(dir);
    std::string jsonl;
    for (std::size_t pos = 0; pos < stream.size(); ++pos) {
        const TaskSpec& task = stream.tasks[pos];
        nlohmann::ordered_json line;
        line["position"] = pos;
        line["task_id"] = task.task_id;
        line["kind"] = to_string(task.kind);
        line["train_rows"] = task.train.rows;
        line["val_rows"] = task.val.rows;
        line["test_rows"] = task.test.rows;
        line["cols"] = task.train.cols;
        line["seed"] = stream.seed;
        line["meta"] = task.meta;
        jsonl += line.dump() + '\n';

        const std::string stem = "task" + std::to_string(pos + 1);
        write_text(dir / (stem + "_train.csv"), feature_csv(task.train));
        write_text(dir / (stem + "_val.csv"), feature_csv(task.val));
        write_text(dir / (stem + "_test.csv"), feature_csv(task.test));
    }
    write_text(dir / "stream.jsonl", jsonl);
}

} // namespace tasl
