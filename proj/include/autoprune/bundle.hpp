// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "autoprune/matrix.hpp"

namespace autoprune {

enum class LayerKind { attention_q, attention_k, attention_v, attention_o, mlp_in, mlp_out };

constexpr int kLayerKindsPerBlock = 6;

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct Topology {
    std::size_t vocab_size = 0;
    std::size_t d_model = 0;
    std::size_t n_heads = 0;
    std::size_t n_blocks = 0;
    std::size_t d_mlp = 0;
    std::size_t max_seq_len = 0;

    bool operator==(const Topology&) const = default;
};

/// One prunable projection matrix. Weight is d_out x d_in, row i = output
/// neuron i.
struct LayerRecord {
    std::string name;
    std::size_t index = 0;
    LayerKind kind = LayerKind::attention_q;
    Matrix weight;

    bool operator==(const LayerRecord&) const = default;
};

struct BlockNorms {
    std::vector<double> ln1_scale, ln1_bias;
    std::vector<double> ln2_scale, ln2_bias;

    bool operator==(const BlockNorms&) const = default;
};

/// Ordered collection of prunable layers plus the aux tensors a tiny
/// decoder-only LM needs. Layers are block-major then kind-major; embeddings,
/// norms and the head are never pruned.
struct ModelBundle {
    Topology topology;
    std::vector<LayerRecord> layers;
    Matrix embedding;                    // vocab x d_model
    std::vector<BlockNorms> block_norms; // one per block
    std::vector<double> final_scale, final_bias;
    std::optional<Matrix> head;          // absent when tied to embedding

    bool tied_head() const { return !head.has_value(); }
    const Matrix& head_matrix() const { return head ? *head : embedding; }

    const LayerRecord& layer(std::size_t block, LayerKind kind) const;
    static std::string layer_name(std::size_t block, LayerKind kind);
    static std::string block_name(std::size_t block);

    void validate() const;

    bool operator==(const ModelBundle&) const = default;
};

struct TokenCorpus {
    std::vector<std::uint32_t> tokens;
};

ModelBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);

TokenCorpus load_corpus(const std::filesystem::path& file);
void save_corpus(const TokenCorpus& corpus, const std::filesystem::path& file);

} // namespace autoprune
