// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "tasl/csv.hpp"
#include "tasl/error.hpp"

namespace tasl {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    return std::string(s.substr(b, e - b));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw DataError("config key " + key + ": '" + value + "' is not a non-negative integer");
    return v;
}

double parse_f64(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw DataError("config key " + key + ": '" + value + "' is not a number");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(s);
    while (std::getline(in, cell, sep)) out.push_back(trim(cell));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += std::to_string(v[i]);
    }
    return out;
}

} // namespace

ExperimentConfig parse_experiment_config(std::string_view text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;

    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(line_no) + " is not key=value: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw DataError("config line " + std::to_string(line_no) + ": empty key");
        if (!seen.insert(key).second) throw DataError("duplicate config key: " + key);

        if (key == "method") cfg.run.method = method_from_string(value);
        else if (key == "scoring") cfg.run.scoring = score_variant_from_string(value);
        else if (key == "partition_scheme") cfg.run.partition_scheme = partition_scheme_from_string(value);
        else if (key == "stream") cfg.stream.kind = task_kind_from_string(value);
        else if (key == "tasks") cfg.stream.task_count = parse_u64(key, value);
        else if (key == "train_size") cfg.stream.train_size = parse_u64(key, value);
        else if (key == "val_size") cfg.stream.val_size = parse_u64(key, value);
        else if (key == "test_size") cfg.stream.test_size = parse_u64(key, value);
        else if (key == "classes") cfg.stream.classes = parse_u64(key, value);
        else if (key == "features") cfg.stream.features = parse_u64(key, value);
        else if (key == "orders") {
            cfg.orders.clear();
            for (const std::string& one : split(value, ';')) {
                std::vector<int> order;
                for (const std::string& cell : split(one, ','))
                    order.push_back(static_cast<int>(parse_u64(key, cell)));
                cfg.orders.push_back(std::move(order));
            }
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const std::string& cell : split(value, ','))
                cfg.seeds.push_back(parse_u64(key, cell));
            if (cfg.seeds.empty()) throw DataError("config key seeds: needs at least one seed");
        } else if (key == "steps_per_task") cfg.run.steps_per_task = parse_u64(key, value);
        else if (key == "batch_size") cfg.run.batch_size = parse_u64(key, value);
        else if (key == "lr") cfg.run.lr = parse_f64(key, value);
        else if (key == "alpha1") cfg.run.alpha1 = parse_f64(key, value);
        else if (key == "alpha2") cfg.run.alpha2 = parse_f64(key, value);
        else if (key == "beta") cfg.run.beta = parse_f64(key, value);
        else if (key == "gamma") cfg.run.gamma = parse_f64(key, value);
        else if (key == "quantile_fraction") cfg.run.quantile_fraction = parse_f64(key, value);
        else if (key == "lambda") cfg.run.lambda = parse_f64(key, value);
        else if (key == "ema_decay") cfg.run.ema_decay = parse_f64(key, value);
        else if (key == "replay_memory") cfg.run.replay_memory = parse_u64(key, value);
        else if (key == "hidden_sizes") {
            cfg.run.hidden_sizes.clear();
            if (!value.empty())
                for (const std::string& cell : split(value, ','))
                    cfg.run.hidden_sizes.push_back(parse_u64(key, cell));
        } else if (key == "d_model") cfg.run.d_model = parse_u64(key, value);
        else if (key == "heads") cfg.run.heads = parse_u64(key, value);
        else if (key == "ff_dim") cfg.run.ff_dim = parse_u64(key, value);
        else if (key == "blocks") cfg.run.blocks = parse_u64(key, value);
        else throw DataError("unknown config key: " + key);
    }

    if (cfg.stream.task_count < 1) throw DataError("config: tasks must be positive");
    if (cfg.orders.empty()) {
        std::vector<int> identity(cfg.stream.task_count);
        for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
        cfg.orders.push_back(std::move(identity));
    }
    for (const std::vector<int>& order : cfg.orders) {
        if (order.size() != cfg.stream.task_count)
            throw DataError("config: each order must list all " +
                            std::to_string(cfg.stream.task_count) + " tasks");
        std::vector<bool> hit(order.size(), false);
        for (int o : order) {
            if (o < 0 || static_cast<std::size_t>(o) >= order.size() || hit[static_cast<std::size_t>(o)])
                throw DataError("config: order is not a permutation: " + join(order, ","));
            hit[static_cast<std::size_t>(o)] = true;
        }
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open config: " + path.string());
    std::string text((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    return parse_experiment_config(text);
}

std::string serialize(const ExperimentConfig& cfg) {
    std::string out;
    auto kv = [&out](std::string_view key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    };

    kv("method", std::string(to_string(cfg.run.method)));
    kv("scoring", std::string(to_string(cfg.run.scoring)));
    kv("partition_scheme", std::string(to_string(cfg.run.partition_scheme)));
    kv("stream", std::string(to_string(cfg.stream.kind)));
    kv("tasks", std::to_string(cfg.stream.task_count));
    kv("train_size", std::to_string(cfg.stream.train_size));
    kv("val_size", std::to_string(cfg.stream.val_size));
    kv("test_size", std::to_string(cfg.stream.test_size));
    kv("classes", std::to_string(cfg.stream.classes));
    kv("features", std::to_string(cfg.stream.features));
    std::string orders;
    for (std::size_t i = 0; i < cfg.orders.size(); ++i) {
        if (i) orders += ";";
        orders += join(cfg.orders[i], ",");
    }
    kv("orders", orders);
    kv("seeds", join(cfg.seeds, ","));
    kv("steps_per_task", std::to_string(cfg.run.steps_per_task));
    kv("batch_size", std::to_string(cfg.run.batch_size));
    kv("lr", format_double(cfg.run.lr));
    kv("alpha1", format_double(cfg.run.alpha1));
    kv("alpha2", format_double(cfg.run.alpha2));
    kv("beta", format_double(cfg.run.beta));
    kv("gamma", format_double(cfg.run.gamma));
    kv("quantile_fraction", format_double(cfg.run.quantile_fraction));
    kv("lambda", format_double(cfg.run.lambda));
    kv("ema_decay", format_double(cfg.run.ema_decay));
    kv("replay_memory", std::to_string(cfg.run.replay_memory));
    kv("hidden_sizes", join(cfg.run.hidden_sizes, ","));
    kv("d_model", std::to_string(cfg.run.d_model));
    kv("heads", std::to_string(cfg.run.heads));
    kv("ff_dim", std::to_string(cfg.run.ff_dim));
    kv("blocks", std::to_string(cfg.run.blocks));
    return out;
}

} // namespace tasl
