// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tasl/error.hpp"

namespace tasl {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot open for writing: " + path.string());
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!file) throw DataError("failed writing: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open: " + path.string());
    return std::string((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::vector<std::string> data_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("bad numeric cell '" + s + "' in " + path.string());
    return v;
}

} // namespace

void write_matrix_csv(const std::filesystem::path& path, const AccuracyMatrix& matrix) {
    std::string out = "after_task";
    for (std::size_t i = 0; i < matrix.task_count; ++i)
        out += ",on_task" + std::to_string(i + 1);
    out += '\n';
    for (std::size_t k = 0; k < matrix.task_count; ++k) {
        out += std::to_string(k + 1);
        for (std::size_t i = 0; i < matrix.task_count; ++i)
            out += ',' + format_double(matrix.at(k, i));
        out += '\n';
    }
    write_file(path, out);
}

AccuracyMatrix read_matrix_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = data_lines(read_file(path));
    if (lines.size() < 2) throw DataError("matrix csv has no data rows: " + path.string());
    const std::size_t k = lines.size() - 1;
    AccuracyMatrix matrix(k);
    for (std::size_t row = 0; row < k; ++row) {
        const std::vector<std::string> cells = split(lines[row + 1], ',');
        if (cells.size() != k + 1)
            throw DataError("matrix csv is not square: " + path.string());
        for (std::size_t i = 0; i < k; ++i)
            matrix.at(row, i) = parse_double(cells[i + 1], path);
    }
    return matrix;
}

void write_metrics_csv(const std::filesystem::path& path, const CLReport& report) {
    std::string out = "metric,value\n";
    out += "avg," + format_double(report.avg) + '\n';
    if (report.fwt) out += "fwt," + format_double(*report.fwt) + '\n';
    if (report.bwt) out += "bwt," + format_double(*report.bwt) + '\n';
    write_file(path, out);
}

void write_trajectory_csv(const std::filesystem::path& path, std::span<const double> trajectory) {
    std::string out = "after_task,first_task_accuracy\n";
    for (std::size_t k = 0; k < trajectory.size(); ++k)
        out += std::to_string(k + 1) + ',' + format_double(trajectory[k]) + '\n';
    write_file(path, out);
}

void write_partition_csv(const std::filesystem::path& path, const SkillPartition& partition) {
    std::string out = "unit_id,label,param_count\n";
    for (const SkillUnit& u : partition.units)
        out += std::to_string(u.id) + ',' + u.label + ',' + std::to_string(u.param_count) + '\n';
    write_file(path, out);
}

void write_importance_csv(const std::filesystem::path& path, const SkillPartition& partition,
                          const UnitScoreMap& raw, const UnitScoreMap& normalized,
                          const ImportanceFlags& flags) {
    const std::size_t n = partition.size();
    if (raw.size() != n || normalized.size() != n || flags.size() != n)
        throw DataError("importance export: score maps do not match the partition");
    std::string out = "unit_id,label,raw_score,normalized_score,important_flag\n";
    for (std::size_t i = 0; i < n; ++i) {
        out += std::to_string(partition.units[i].id) + ',' + partition.units[i].label + ',' +
               format_double(raw.scores[i]) + ',' + format_double(normalized.scores[i]) + ',' +
               (flags[i] ? '1' : '0');
        out += '\n';
    }
    write_file(path, out);
}

UnitScoreMap read_importance_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = data_lines(read_file(path));
    if (lines.size() < 2) throw DataError("importance csv has no data rows: " + path.string());
    UnitScoreMap map;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const std::vector<std::string> cells = split(lines[row], ',');
        if (cells.size() != 5)
            throw DataError("importance csv needs 5 columns: " + path.string());
        const std::size_t id = static_cast<std::size_t>(parse_double(cells[0], path));
        if (id != row - 1)
            throw DataError("importance csv unit ids must ascend from 0: " + path.string());
        map.scores.push_back(parse_double(cells[2], path));
    }
    return map;
}

void write_merge_report_csv(const std::filesystem::path& path,
                            std::span<const MergeCaseRow> report) {
    std::string out = "unit_id,label,prev_flag,cur_flag,case\n";
    for (const MergeCaseRow& r : report) {
        out += std::to_string(r.unit_id) + ',' + r.label + ',' + (r.prev_flag ? '1' : '0');
        out += ',';
        out += r.cur_flag ? '1' : '0';
        out += ',' + std::to_string(static_cast<int>(r.merge_case)) + '\n';
    }
    write_file(path, out);
}

void write_aggregate_csv(const std::filesystem::path& path, const AggregateReport& aggregate) {
    std::string out = "metric,mean,stderr,runs\n";
    const std::string n = std::to_string(aggregate.run_count);
    out += "avg," + format_double(aggregate.avg.mean) + ',' +
           format_double(aggregate.avg.stderr_) + ',' + n + '\n';
    if (aggregate.fwt)
        out += "fwt," + format_double(aggregate.fwt->mean) + ',' +
               format_double(aggregate.fwt->stderr_) + ',' + n + '\n';
    if (aggregate.bwt)
        out += "bwt," + format_double(aggregate.bwt->mean) + ',' +
               format_double(aggregate.bwt->stderr_) + ',' + n + '\n';
    write_file(path, out);
}

void write_runs_csv(const std::filesystem::path& path, std::span<const RunRecord> records) {
    std::string out = "order_index,order,seed,avg,fwt,bwt\n";
    for (const RunRecord& r : records) {
        std::string order;
        for (std::size_t i = 0; i < r.order.size(); ++i)
            order += (i ? "-" : "") + std::to_string(r.order[i]);
        out += std::to_string(r.order_index) + ',' + order + ',' + std::to_string(r.seed) + ',' +
               format_double(r.report.avg) + ',' +
               (r.report.fwt ? format_double(*r.report.fwt) : "") + ',' +
               (r.report.bwt ? format_double(*r.report.bwt) : "") + '\n';
    }
    write_file(path, out);
}

} // namespace tasl
