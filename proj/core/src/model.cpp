// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tasl/error.hpp"
#include "tasl/rng.hpp"

namespace tasl {

std::string_view to_string(ArchKind kind) {
    return kind == ArchKind::Mlp ? "mlp" : "tiny-transformer";
}

ArchKind arch_kind_from_string(std::string_view s) {
    if (s == "mlp") return ArchKind::Mlp;
    if (s == "tiny-transformer") return ArchKind::TinyTransformer;
    throw DataError("unknown architecture kind: " + std::string(s));
}

void ArchDescriptor::validate() const {
    if (kind == ArchKind::Mlp) {
        if (layer_sizes.size() < 2) throw DataError("mlp needs at least two layer sizes");
        for (std::size_t s : layer_sizes)
            if (s == 0) throw DataError("mlp layer sizes must be positive");
    } else {
        if (d_model == 0 || heads == 0 || ff_dim == 0 || blocks == 0 || classes == 0)
            throw DataError("transformer dims must all be positive");
        if (d_model % heads != 0) throw DataError("transformer width must be divisible by head count");
    }
}

std::string ArchDescriptor::serialize() const {
    std::ostringstream out;
    out << "kind=" << to_string(kind) << "\n";
    if (kind == ArchKind::Mlp) {
        out << "layer_sizes=";
        for (std::size_t i = 0; i < layer_sizes.size(); ++i)
            out << (i ? "," : "") << layer_sizes[i];
        out << "\n";
    } else {
        out << "d_model=" << d_model << "\n"
            << "heads=" << heads << "\n"
            << "ff_dim=" << ff_dim << "\n"
            << "blocks=" << blocks << "\n"
            << "classes=" << classes << "\n";
    }
    out << "seed=" << seed << "\n";
    return out.str();
}

ArchDescriptor parse_arch(std::string_view text) {
    ArchDescriptor arch;
    bool kind_seen = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("bad descriptor line: " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        try {
            if (key == "kind") {
                arch.kind = arch_kind_from_string(value);
                kind_seen = true;
            } else if (key == "layer_sizes") {
                arch.layer_sizes.clear();
                std::istringstream vs(value);
                std::string tok;
                while (std::getline(vs, tok, ','))
                    arch.layer_sizes.push_back(std::stoull(tok));
            } else if (key == "d_model") {
                arch.d_model = std::stoull(value);
            } else if (key == "heads") {
                arch.heads = std::stoull(value);
            } else if (key == "ff_dim") {
                arch.ff_dim = std::stoull(value);
            } else if (key == "blocks") {
                arch.blocks = std::stoull(value);
            } else if (key == "classes") {
                arch.classes = std::stoull(value);
            } else if (key == "seed") {
                arch.seed = std::stoull(value);
            } else {
                throw DataError("unknown descriptor key: " + key);
            }
        } catch (const std::invalid_argument&) {
            throw DataError("bad descriptor value for " + key + ": " + value);
        } catch (const std::out_of_range&) {
            throw DataError("descriptor value out of range for " + key + ": " + value);
        }
    }
    if (!kind_seen) throw DataError("descriptor is missing its kind");
    arch.validate();
    return arch;
}

namespace {

// Scaled-uniform init: +-sqrt(6 / (fan_in + fan_out)).
void fill_uniform(ParamTensor& t, std::size_t fan_in, std::size_t fan_out, rng::Engine& g) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.values) v = rng::uniform(g, -limit, limit);
}

ParamTensor make_tensor(std::string name, std::vector<std::size_t> shape, double fill = 0.0) {
    ParamTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    const std::size_t n = shape_product(t.shape);
    t.values.assign(n, fill);
    t.grad.assign(n, 0.0);
    return t;
}

inline double stable_gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
}

inline double gelu_prime(double x) {
    const double phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
    return phi + x * pdf;
}

constexpr double kNormEps = 1e-6;

// y = a B for row-major a [rows x inner], B [inner x cols].
void matmul(const double* a, const double* b, double* y,
            std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* yr = y + r * cols;
        std::fill(yr, yr + cols, 0.0);
        const double* ar = a + r * inner;
        for (std::size_t i = 0; i < inner; ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            const double* br = b + i * cols;
            for (std::size_t c = 0; c < cols; ++c) yr[c] += av * br[c];
        }
    }
}

// dA += dY B^T
void matmul_grad_a(const double* dy, const double* b, double* da,
                   std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy + r * cols;
        double* dar = da + r * inner;
        for (std::size_t i = 0; i < inner; ++i) {
            const double* br = b + i * cols;
            double acc = 0.0;
            for (std::size_t c = 0; c < cols; ++c) acc += dyr[c] * br[c];
            dar[i] += acc;
        }
    }
}

// dB += A^T dY
void matmul_grad_b(const double* a, const double* dy, double* db,
                   std::size_t rows, std::size_t inner, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = a + r * inner;
        const double* dyr = dy + r * cols;
        for (std::size_t i = 0; i < inner; ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            double* dbr = db + i * cols;
            for (std::size_t c = 0; c < cols; ++c) dbr[c] += av * dyr[c];
        }
    }
}

} // namespace

Model::Model(const ArchDescriptor& arch) : arch_(arch) {
    arch_.validate();
    init_params();
}

void Model::init_params() {
    params_.clear();
    rng::Engine g = rng::engine(arch_.seed, "init");
    if (arch_.kind == ArchKind::Mlp) {
        for (std::size_t l = 0; l + 1 < arch_.layer_sizes.size(); ++l) {
            const std::size_t in = arch_.layer_sizes[l];
            const std::size_t out = arch_.layer_sizes[l + 1];
            std::string prefix = "layer" + std::to_string(l);
            ParamTensor w = make_tensor(prefix + ".weight", {in, out});
            fill_uniform(w, in, out, g);
            params_.push_back(std::move(w));
            params_.push_back(make_tensor(prefix + ".bias", {out}, 0.0));
        }
    } else {
        const std::size_t d = arch_.d_model, f = arch_.ff_dim, c = arch_.classes;
        ParamTensor embed = make_tensor("embed", {c, d});
        fill_uniform(embed, c, d, g);
        params_.push_back(std::move(embed));
        for (std::size_t b = 0; b < arch_.blocks; ++b) {
            std::string prefix = "block" + std::to_string(b) + ".";
            for (const char* nm : {"attn.q", "attn.k", "attn.v", "attn.o"}) {
                ParamTensor t = make_tensor(prefix + nm, {d, d});
                fill_uniform(t, d, d, g);
                params_.push_back(std::move(t));
            }
            ParamTensor wi = make_tensor(prefix + "mlp.wi", {d, f});
            fill_uniform(wi, d, f, g);
            params_.push_back(std::move(wi));
            ParamTensor wo = make_tensor(prefix + "mlp.wo", {f, d});
            fill_uniform(wo, f, d, g);
            params_.push_back(std::move(wo));
            params_.push_back(make_tensor(prefix + "norm1", {d}, 1.0));
            params_.push_back(make_tensor(prefix + "norm2", {d}, 1.0));
        }
        ParamTensor head = make_tensor("head", {d, c});
        fill_uniform(head, d, c, g);
        params_.push_back(std::move(head));
    }
    by_name_.clear();
    offsets_.clear();
    total_params_ = 0;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!by_name_.emplace(params_[i].name, i).second)
            throw DataError("duplicate tensor name: " + params_[i].name);
        offsets_.push_back(total_params_);
        total_params_ += params_[i].size();
    }
}

std::size_t Model::tensor_index(std::string_view name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw DataError("no tensor named " + std::string(name));
    return it->second;
}

std::size_t Model::tensor_offset(std::size_t tensor_idx) const {
    return offsets_.at(tensor_idx);
}

double Model::forward_loss(const Batch& batch) {
    if (batch.rows == 0) throw DataError("empty batch");
    const double loss =
        arch_.kind == ArchKind::Mlp ? forward_mlp(batch) : forward_transformer(batch);
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
    pending_ = true;
    return loss;
}

void Model::backward() {
    if (!pending_) throw DataError("backward called without a pending forward pass");
    for (ParamTensor& t : params_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
    if (arch_.kind == ArchKind::Mlp)
        backward_mlp();
    else
        backward_transformer();
    pending_ = false;
}

void Model::sgd_step(double lr) {
    for (ParamTensor& t : params_) {
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            t.values[i] -= lr * t.grad[i];
            if (!std::isfinite(t.values[i]))
                throw NumericError("non-finite parameter in " + t.name + " after sgd step");
        }
    }
}

// ---------------------------------------------------------------------------
// MLP

double Model::forward_mlp(const Batch& batch) {
    if (batch.token_input()) throw DataError("mlp expects dense feature input");
    if (batch.cols != arch_.layer_sizes.front())
        throw DataError("batch feature width does not match mlp input size");
    const std::size_t B = batch.rows;
    const std::size_t L = arch_.layer_sizes.size() - 1;
    const std::size_t C = arch_.layer_sizes.back();

    batch_ = batch;
    acts_.assign(L + 1, {});
    acts_[0] = batch.features;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = arch_.layer_sizes[l];
        const std::size_t out = arch_.layer_sizes[l + 1];
        const ParamTensor& w = params_[2 * l];
        const ParamTensor& b = params_[2 * l + 1];
        acts_[l + 1].assign(B * out, 0.0);
        matmul(acts_[l].data(), w.values.data(), acts_[l + 1].data(), B, in, out);
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t j = 0; j < out; ++j) acts_[l + 1][r * out + j] += b.values[j];
        if (l + 1 < L)
            for (double& v : acts_[l + 1]) v = std::tanh(v);
    }

    // softmax cross-entropy, mean over rows
    probs_.assign(B * C, 0.0);
    preds_.assign(B, 0);
    double loss = 0.0;
    const std::vector<double>& logits = acts_[L];
    for (std::size_t r = 0; r < B; ++r) {
        const double* z = logits.data() + r * C;
        double m = z[0];
        std::size_t argmax = 0;
        for (std::size_t j = 1; j < C; ++j)
            if (z[j] > m) { m = z[j]; argmax = j; }
        double sum = 0.0;
        for (std::size_t j = 0; j < C; ++j) sum += std::exp(z[j] - m);
        const double lse = m + std::log(sum);
        for (std::size_t j = 0; j < C; ++j) probs_[r * C + j] = std::exp(z[j] - lse);
        const int y = batch.targets[r];
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw DataError("target class id out of range");
        loss += lse - z[y];
        preds_[r] = static_cast<int>(argmax);
    }
    return loss / static_cast<double>(B);
}

void Model::backward_mlp() {
    const std::size_t B = batch_.rows;
    const std::size_t L = arch_.layer_sizes.size() - 1;
    const std::size_t C = arch_.layer_sizes.back();

    std::vector<double> dz(B * C);
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t j = 0; j < C; ++j)
            dz[r * C + j] =
                (probs_[r * C + j] - (static_cast<int>(j) == batch_.targets[r] ? 1.0 : 0.0)) /
                static_cast<double>(B);

    for (std::size_t l = L; l-- > 0;) {
        const std::size_t in = arch_.layer_sizes[l];
        const std::size_t out = arch_.layer_sizes[l + 1];
        ParamTensor& w = params_[2 * l];
        ParamTensor& b = params_[2 * l + 1];
        matmul_grad_b(acts_[l].data(), dz.data(), w.grad.data(), B, in, out);
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t j = 0; j < out; ++j) b.grad[j] += dz[r * out + j];
        if (l == 0) break;
        std::vector<double> da(B * in, 0.0);
        matmul_grad_a(dz.data(), w.values.data(), da.data(), B, in, out);
        // through tanh: acts_[l] holds tanh(z)
        for (std::size_t i = 0; i < da.size(); ++i) {
            const double a = acts_[l][i];
            da[i] *= 1.0 - a * a;
        }
        dz = std::move(da);
    }
}

// ---------------------------------------------------------------------------
// Tiny transformer: pre-norm blocks of self-attention and a gelu MLP over a
// fixed-length token sequence, per-token classification head, no positions.

namespace {

// y_i = g_i * x_i / rms(x); returns 1/rms for the backward pass.
double rmsnorm_row(const double* x, const double* gain, double* y, std::size_t d) {
    double ms = 0.0;
    for (std::size_t i = 0; i < d; ++i) ms += x[i] * x[i];
    const double rinv = 1.0 / std::sqrt(ms / static_cast<double>(d) + kNormEps);
    for (std::size_t i = 0; i < d; ++i) y[i] = gain[i] * x[i] * rinv;
    return rinv;
}

void rmsnorm_row_backward(const double* x, const double* gain, double rinv,
                          const double* dy, double* dx, double* dgain, std::size_t d) {
    // u = x * rinv, y = g .* u
    double dot = 0.0; // sum_i du_i * x_i
    for (std::size_t i = 0; i < d; ++i) {
        dgain[i] += dy[i] * x[i] * rinv;
        dot += dy[i] * gain[i] * x[i];
    }
    const double k = dot * rinv * rinv * rinv / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) dx[i] += dy[i] * gain[i] * rinv - k * x[i];
}

} // namespace

double Model::forward_transformer(const Batch& batch) {
    if (!batch.token_input()) throw DataError("transformer expects token input");
    const std::size_t B = batch.rows, S = batch.cols;
    const std::size_t d = arch_.d_model, H = arch_.heads, dh = d / H;
    const std::size_t f = arch_.ff_dim, C = arch_.classes;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    batch_ = batch;
    const ParamTensor& embed = params_[tensor_index("embed")];

    std::vector<double> x(B * S * d);
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t s = 0; s < S; ++s) {
            const int tok = batch.tokens[r * S + s];
            if (tok < 0 || static_cast<std::size_t>(tok) >= C)
                throw DataError("token id out of range");
            std::copy_n(embed.values.data() + static_cast<std::size_t>(tok) * d, d,
                        x.data() + (r * S + s) * d);
        }

    blocks_.assign(arch_.blocks, {});
    for (std::size_t bi = 0; bi < arch_.blocks; ++bi) {
        BlockCache& bc = blocks_[bi];
        const std::string prefix = "block" + std::to_string(bi) + ".";
        const ParamTensor& wq = params_[tensor_index(prefix + "attn.q")];
        const ParamTensor& wk = params_[tensor_index(prefix + "attn.k")];
        const ParamTensor& wv = params_[tensor_index(prefix + "attn.v")];
        const ParamTensor& wo = params_[tensor_index(prefix + "attn.o")];
        const ParamTensor& wi = params_[tensor_index(prefix + "mlp.wi")];
        const ParamTensor& wmo = params_[tensor_index(prefix + "mlp.wo")];
        const ParamTensor& g1 = params_[tensor_index(prefix + "norm1")];
        const ParamTensor& g2 = params_[tensor_index(prefix + "norm2")];

        bc.x_in = x;
        bc.n1.assign(B * S * d, 0.0);
        bc.rinv1.assign(B * S, 0.0);
        for (std::size_t t = 0; t < B * S; ++t)
            bc.rinv1[t] = rmsnorm_row(bc.x_in.data() + t * d, g1.values.data(),
                                      bc.n1.data() + t * d, d);

        bc.q.assign(B * S * d, 0.0);
        bc.k.assign(B * S * d, 0.0);
        bc.v.assign(B * S * d, 0.0);
        matmul(bc.n1.data(), wq.values.data(), bc.q.data(), B * S, d, d);
        matmul(bc.n1.data(), wk.values.data(), bc.k.data(), B * S, d, d);
        matmul(bc.n1.data(), wv.values.data(), bc.v.data(), B * S, d, d);

        // attention weights per item and head: softmax over key positions
        bc.attn.assign(B * H * S * S, 0.0);
        bc.ctx.assign(B * S * d, 0.0);
        for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t h = 0; h < H; ++h) {
                const std::size_t ho = h * dh;
                for (std::size_t si = 0; si < S; ++si) {
                    double* row = bc.attn.data() + ((r * H + h) * S + si) * S;
                    const double* qv = bc.q.data() + (r * S + si) * d + ho;
                    double m = -1e300;
                    for (std::size_t sj = 0; sj < S; ++sj) {
                        const double* kv = bc.k.data() + (r * S + sj) * d + ho;
                        double dot = 0.0;
                        for (std::size_t e = 0; e < dh; ++e) dot += qv[e] * kv[e];
                        row[sj] = dot * scale;
                        m = std::max(m, row[sj]);
                    }
                    double sum = 0.0;
                    for (std::size_t sj = 0; sj < S; ++sj) {
                        row[sj] = std::exp(row[sj] - m);
                        sum += row[sj];
                    }
                    for (std::size_t sj = 0; sj < S; ++sj) row[sj] /= sum;
                    double* out = bc.ctx.data() + (r * S + si) * d + ho;
                    for (std::size_t sj = 0; sj < S; ++sj) {
                        const double p = row[sj];
                        const double* vv = bc.v.data() + (r * S + sj) * d + ho;
                        for (std::size_t e = 0; e < dh; ++e) out[e] += p * vv[e];
                    }
                }
            }
        }

        bc.x2.assign(B * S * d, 0.0);
        matmul(bc.ctx.data(), wo.values.data(), bc.x2.data(), B * S, d, d);
        for (std::size_t i = 0; i < bc.x2.size(); ++i) bc.x2[i] += bc.x_in[i];

        bc.n2.assign(B * S * d, 0.0);
        bc.rinv2.assign(B * S, 0.0);
        for (std::size_t t = 0; t < B * S; ++t)
            bc.rinv2[t] = rmsnorm_row(bc.x2.data() + t * d, g2.values.data(),
                                      bc.n2.data() + t * d, d);

        bc.g.assign(B * S * f, 0.0);
        matmul(bc.n2.data(), wi.values.data(), bc.g.data(), B * S, d, f);
        bc.h.assign(B * S * f, 0.0);
        for (std::size_t i = 0; i < bc.g.size(); ++i) bc.h[i] = stable_gelu(bc.g[i]);

        x.assign(B * S * d, 0.0);
        matmul(bc.h.data(), wmo.values.data(), x.data(), B * S, f, d);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += bc.x2[i];
    }

    x_final_ = std::move(x);
    const ParamTensor& head = params_[tensor_index("head")];
    std::vector<double> logits(B * S * C, 0.0);
    matmul(x_final_.data(), head.values.data(), logits.data(), B * S, d, C);

    probs_.assign(B * S * C, 0.0);
    preds_.assign(B * S, 0);
    double loss = 0.0;
    for (std::size_t t = 0; t < B * S; ++t) {
        const double* z = logits.data() + t * C;
        double m = z[0];
        std::size_t argmax = 0;
        for (std::size_t j = 1; j < C; ++j)
            if (z[j] > m) { m = z[j]; argmax = j; }
        double sum = 0.0;
        for (std::size_t j = 0; j < C; ++j) sum += std::exp(z[j] - m);
        const double lse = m + std::log(sum);
        for (std::size_t j = 0; j < C; ++j) probs_[t * C + j] = std::exp(z[j] - lse);
        const int y = batch.targets[t];
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw DataError("token label out of range");
        loss += lse - z[y];
        preds_[t] = static_cast<int>(argmax);
    }
    return loss / static_cast<double>(B * S);
}

void Model::backward_transformer() {
    const std::size_t B = batch_.rows, S = batch_.cols;
    const std::size_t d = arch_.d_model, H = arch_.heads, dh = d / H;
    const std::size_t f = arch_.ff_dim, C = arch_.classes;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t T = B * S;

    ParamTensor& head = params_[tensor_index("head")];
    std::vector<double> dlogits(T * C);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < C; ++j)
            dlogits[t * C + j] =
                (probs_[t * C + j] - (static_cast<int>(j) == batch_.targets[t] ? 1.0 : 0.0)) /
                static_cast<double>(T);

    std::vector<double> dx(T * d, 0.0);
    matmul_grad_b(x_final_.data(), dlogits.data(), head.grad.data(), T, d, C);
    matmul_grad_a(dlogits.data(), head.values.data(), dx.data(), T, d, C);

    for (std::size_t bi = arch_.blocks; bi-- > 0;) {
        BlockCache& bc = blocks_[bi];
        const std::string prefix = "block" + std::to_string(bi) + ".";
        ParamTensor& wq = params_[tensor_index(prefix + "attn.q")];
        ParamTensor& wk = params_[tensor_index(prefix + "attn.k")];
        ParamTensor& wv = params_[tensor_index(prefix + "attn.v")];
        ParamTensor& wo = params_[tensor_index(prefix + "attn.o")];
        ParamTensor& wi = params_[tensor_index(prefix + "mlp.wi")];
        ParamTensor& wmo = params_[tensor_index(prefix + "mlp.wo")];
        ParamTensor& g1 = params_[tensor_index(prefix + "norm1")];
        ParamTensor& g2 = params_[tensor_index(prefix + "norm2")];

        // x3 = x2 + gelu(n2 wi) wmo
        std::vector<double> dh_buf(T * f, 0.0);
        matmul_grad_b(bc.h.data(), dx.data(), wmo.grad.data(), T, f, d);
        matmul_grad_a(dx.data(), wmo.values.data(), dh_buf.data(), T, f, d);
        for (std::size_t i = 0; i < dh_buf.size(); ++i) dh_buf[i] *= gelu_prime(bc.g[i]);
        std::vector<double> dn2(T * d, 0.0);
        matmul_grad_b(bc.n2.data(), dh_buf.data(), wi.grad.data(), T, d, f);
        matmul_grad_a(dh_buf.data(), wi.values.data(), dn2.data(), T, d, f);

        std::vector<double> dx2 = dx; // residual branch
        for (std::size_t t = 0; t < T; ++t)
            rmsnorm_row_backward(bc.x2.data() + t * d, g2.values.data(), bc.rinv2[t],
                                 dn2.data() + t * d, dx2.data() + t * d, g2.grad.data(), d);

        // x2 = x_in + ctx wo
        std::vector<double> dctx(T * d, 0.0);
        matmul_grad_b(bc.ctx.data(), dx2.data(), wo.grad.data(), T, d, d);
        matmul_grad_a(dx2.data(), wo.values.data(), dctx.data(), T, d, d);

        std::vector<double> dq(T * d, 0.0), dk(T * d, 0.0), dv(T * d, 0.0);
        std::vector<double> dprow(S);
        for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t h = 0; h < H; ++h) {
                const std::size_t ho = h * dh;
                for (std::size_t si = 0; si < S; ++si) {
                    const double* p = bc.attn.data() + ((r * H + h) * S + si) * S;
                    const double* dout = dctx.data() + (r * S + si) * d + ho;
                    // dP and softmax jacobian
                    double dot = 0.0;
                    for (std::size_t sj = 0; sj < S; ++sj) {
                        const double* vv = bc.v.data() + (r * S + sj) * d + ho;
                        double acc = 0.0;
                        for (std::size_t e = 0; e < dh; ++e) acc += dout[e] * vv[e];
                        dprow[sj] = acc;
                        dot += acc * p[sj];
                        double* dvv = dv.data() + (r * S + sj) * d + ho;
                        for (std::size_t e = 0; e < dh; ++e) dvv[e] += p[sj] * dout[e];
                    }
                    const double* qv = bc.q.data() + (r * S + si) * d + ho;
                    double* dqv = dq.data() + (r * S + si) * d + ho;
                    for (std::size_t sj = 0; sj < S; ++sj) {
                        const double ds = (dprow[sj] - dot) * p[sj] * scale;
                        const double* kv = bc.k.data() + (r * S + sj) * d + ho;
                        double* dkv = dk.data() + (r * S + sj) * d + ho;
                        for (std::size_t e = 0; e < dh; ++e) {
                            dqv[e] += ds * kv[e];
                            dkv[e] += ds * qv[e];
                        }
                    }
                }
            }
        }

        std::vector<double> dn1(T * d, 0.0);
        matmul_grad_b(bc.n1.data(), dq.data(), wq.grad.data(), T, d, d);
        matmul_grad_a(dq.data(), wq.values.data(), dn1.data(), T, d, d);
        matmul_grad_b(bc.n1.data(), dk.data(), wk.grad.data(), T, d, d);
        matmul_grad_a(dk.data(), wk.values.data(), dn1.data(), T, d, d);
        matmul_grad_b(bc.n1.data(), dv.data(), wv.grad.data(), T, d, d);
        matmul_grad_a(dv.data(), wv.values.data(), dn1.data(), T, d, d);

        std::vector<double> dx_in = std::move(dx2); // residual branch
        for (std::size_t t = 0; t < T; ++t)
            rmsnorm_row_backward(bc.x_in.data() + t * d, g1.values.data(), bc.rinv1[t],
                                 dn1.data() + t * d, dx_in.data() + t * d, g1.grad.data(), d);
        dx = std::move(dx_in);
    }

    ParamTensor& embed = params_[tensor_index("embed")];
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t tok = static_cast<std::size_t>(batch_.tokens[r * S + s]);
            double* ge = embed.grad.data() + tok * d;
            const double* dxe = dx.data() + (r * S + s) * d;
            for (std::size_t e = 0; e < d; ++e) ge[e] += dxe[e];
        }
}

} // namespace tasl
