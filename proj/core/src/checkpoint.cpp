// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "tasl/error.hpp"

namespace tasl {

namespace {

constexpr char kMagic[8] = {'T', 'A', 'S', 'L', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

// Bounds-checked cursor over the raw file bytes.
class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    bool at_end() const { return pos_ == bytes_.size(); }

    const char* take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw DataError("truncated checkpoint");
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::uint32_t u32() {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(4));
        return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
               static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
    }

    double f64() {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(8));
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        double d;
        std::memcpy(&d, &bits, sizeof d);
        return d;
    }

    std::string str(std::size_t n) { return std::string(take(n), n); }

private:
    std::string bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    if (model.tensors().empty()) throw DataError("refusing to save a model with no parameters");

    std::string out;
    out.append(kMagic, sizeof kMagic);
    put_u32(out, kCheckpointVersion);

    const std::string arch = model.arch().serialize();
    put_u32(out, static_cast<std::uint32_t>(arch.size()));
    out.append(arch);

    for (const ParamTensor& t : model.tensors()) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.append(t.name);
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.values) put_f64(out, v);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot open checkpoint for writing: " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw DataError("failed writing checkpoint: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    Reader in(std::move(bytes));

    if (std::memcmp(in.take(sizeof kMagic), kMagic, sizeof kMagic) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path.string());
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    const std::uint32_t arch_len = in.u32();
    Model model(parse_arch(in.str(arch_len)));

    std::vector<bool> seen(model.tensors().size(), false);
    while (!in.at_end()) {
        const std::uint32_t name_len = in.u32();
        const std::string name = in.str(name_len);
        const std::size_t idx = model.tensor_index(name);  // throws on unknown names
        if (seen[idx]) throw DataError("duplicate tensor in checkpoint: " + name);
        seen[idx] = true;

        ParamTensor& tensor = model.tensors()[idx];
        const std::uint32_t ndim = in.u32();
        if (ndim != tensor.shape.size())
            throw DataError("tensor rank mismatch for " + name);
        std::size_t count = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t dim = in.u32();
            if (dim != tensor.shape[d]) throw DataError("tensor shape mismatch for " + name);
            if (dim != 0 && count > std::numeric_limits<std::size_t>::max() / dim)
                throw DataError("tensor dimension overflow for " + name);
            count *= dim;
        }
        for (std::size_t i = 0; i < count; ++i) tensor.values[i] = in.f64();
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw DataError("checkpoint is missing tensor: " + model.tensors()[i].name);
    return model;
}

} // namespace tasl
