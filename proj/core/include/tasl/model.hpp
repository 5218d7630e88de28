// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Two small trainable architectures (an MLP classifier and a single-stack
// transformer token classifier) with hand-written reverse-mode gradients,
// plus plain SGD. Everything is double precision and deterministic given
// the descriptor seed.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tasl/batch.hpp"
#include "tasl/tensor.hpp"

namespace tasl {

enum class ArchKind { Mlp, TinyTransformer };

struct ArchDescriptor {
    ArchKind kind = ArchKind::Mlp;
    std::vector<std::size_t> layer_sizes;  // mlp: input, hidden..., classes
    std::size_t d_model = 0;               // transformer width
    std::size_t heads = 0;
    std::size_t ff_dim = 0;
    std::size_t blocks = 0;
    std::size_t classes = 0;               // transformer vocab == output classes
    std::uint64_t seed = 0;

    std::size_t output_classes() const {
        return kind == ArchKind::Mlp ? layer_sizes.back() : classes;
    }

    /// Throws DataError if the dimensions are unusable.
    void validate() const;

    /// "key=value" lines, fixed key order; the inverse of parse_arch().
    std::string serialize() const;

    /// True when both descriptors lay out identical tensors; the init seed
    /// may differ. This is the compatibility notion merging needs.
    bool same_shape(const ArchDescriptor& other) const {
        return kind == other.kind && layer_sizes == other.layer_sizes &&
               d_model == other.d_model && heads == other.heads && ff_dim == other.ff_dim &&
               blocks == other.blocks && classes == other.classes;
    }

    bool operator==(const ArchDescriptor&) const = default;
};

ArchDescriptor parse_arch(std::string_view text);

class Model {
public:
    Model() = default;
    explicit Model(const ArchDescriptor& arch);

    const ArchDescriptor& arch() const { return arch_; }
    const std::vector<ParamTensor>& tensors() const { return params_; }
    std::vector<ParamTensor>& tensors() { return params_; }

    std::size_t tensor_index(std::string_view name) const;      // throws DataError
    std::size_t tensor_offset(std::size_t tensor_idx) const;    // flat parameter offset
    std::size_t param_count() const { return total_params_; }

    /// Mean cross-entropy over the batch (and over tokens for sequence input).
    /// Caches activations for backward(); argmax predictions are kept too.
    double forward_loss(const Batch& batch);

    /// Per-item class ids (feature input) or per-token label ids (token
    /// input, row-major) from the most recent forward pass.
    const std::vector<int>& predictions() const { return preds_; }

    /// Fills every tensor's grad buffer with d(loss)/d(param). Grads are
    /// overwritten, not accumulated. Requires a preceding forward_loss().
    void backward();

    /// w <- w - lr * g. Throws NumericError if any parameter goes non-finite.
    void sgd_step(double lr);

private:
    void init_params();
    double forward_mlp(const Batch& batch);
    void backward_mlp();
    double forward_transformer(const Batch& batch);
    void backward_transformer();

    ArchDescriptor arch_;
    std::vector<ParamTensor> params_;
    std::map<std::string, std::size_t, std::less<>> by_name_;
    std::vector<std::size_t> offsets_;
    std::size_t total_params_ = 0;

    // Cached forward state. Plain buffers so the model stays copyable.
    struct BlockCache {
        std::vector<double> x_in, n1, rinv1, q, k, v, attn, ctx, x2, n2, rinv2, g, h;
    };
    Batch batch_;
    std::vector<std::vector<double>> acts_;  // mlp activations, acts_[0] = input
    std::vector<BlockCache> blocks_;
    std::vector<double> x_final_;
    std::vector<double> probs_;              // softmax over logits
    std::vector<int> preds_;
    bool pending_ = false;
};

std::string_view to_string(ArchKind kind);
ArchKind arch_kind_from_string(std::string_view s);

} // namespace tasl
