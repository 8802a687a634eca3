#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kt/features.hpp"
#include "kt/matrix.hpp"
#include "kt/tensor.hpp"

namespace kt {

/// Network hyper-parameters. Defaults are the full-scale settings
/// (d_model 512, 4 heads, sequence length 400, dropout 0.2); tests and the
/// desk-scale presets shrink them. Feature widths and the embedding row
/// count are bound from the FeatureConfig before init_params.
struct ModelConfig {
    int d_model = 512;
    int n_heads = 4;
    int seq_len = 400;
    double dropout_rate = 0.2;
    int embed_dim = 512;
    std::array<int, 5> mlp_hidden = {0, 0, 0, 0, 0};  // 0 -> d_model; order a..e
    int mask_window = 0;                              // 0 -> seq_len (full anti-leak causal)
    int query_width = 0;
    int memory_width = kMemoryFeatureWidth;
    int hand_width = 0;
    int n_content = 0;
    std::uint64_t init_seed = 1;

    int head_dim() const { return d_model / n_heads; }
    int hidden(int mlp) const { return mlp_hidden[mlp] > 0 ? mlp_hidden[mlp] : d_model; }
    int effective_window() const { return mask_window > 0 ? mask_window : seq_len; }
    void validate() const;
};

/// All learned tensors, keyed by name. std::map keeps iteration (and hence
/// checkpoint and optimizer order) deterministic.
struct ModelParams {
    std::map<std::string, TensorPtr> tensors;

    const TensorPtr& at(const std::string& name) const;
    std::vector<TensorPtr> all() const;
};

ModelParams init_params(const ModelConfig& config);
ModelParams clone_params(const ModelParams& params);

/// One flattened batch of B windows of length L each, row index = b * L + t.
/// Pad slots carry content_index -1, all-zero feature rows, and are excluded
/// from loss_mask and every allowed matrix.
struct ModelBatch {
    int batch = 0;
    int window_len = 0;
    std::vector<int> content_index;      // B*L
    Matrix query;                        // (B*L) x query_width
    Matrix memory;                       // (B*L) x memory_width
    Matrix hand;                         // (B*L) x hand_width
    std::vector<int> shift_index;        // B*L, global row or -1
    std::vector<BoolMatrix> allowed;     // B matrices, L x L
    std::vector<double> labels;          // B*L, 0/1 (0 where undefined)
    std::vector<std::uint8_t> loss_mask; // question and not pad

    std::size_t flat_size() const { return static_cast<std::size_t>(batch) * window_len; }
    void validate(const ModelConfig& config) const;
};

/// Per-position correctness probability, shape (B*L, 1).
///
/// Pipeline: content embedding + query features -> MLP; concat memory -> MLP
/// -> LSTM; hidden states and hand-crafted rows gathered through
/// shift_index so each position sees only strictly earlier containers; the
/// gathered state + query + gathered aggregates form the attention query,
/// query + memory form key/value; per-head masked attention; sigmoid head.
TensorPtr model_forward(Tape& tape, const ModelParams& params, const ModelConfig& config,
                        const ModelBatch& batch, bool train = false,
                        std::uint64_t dropout_key = 0);

/// Mean BCE over question positions. Errors if the batch has none.
TensorPtr model_loss(Tape& tape, const ModelParams& params, const ModelConfig& config,
                     const ModelBatch& batch, bool train = false, std::uint64_t dropout_key = 0);

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary checkpoint: magic "RKT1", u32 LE format version, u32 LE manifest
/// length, JSON manifest (config + tensor names/shapes/dtype), then raw
/// little-endian float64 data in manifest order. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& model_config, const FeatureConfig& feature_config,
                     const std::string& run_manifest_hash = "");

struct Checkpoint {
    ModelParams params;
    ModelConfig model_config;
    FeatureConfig feature_config;
    std::string run_manifest_hash;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace kt
