#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tge/token_grid.hpp"

namespace tge {

// CLS-to-patch attention weights: nonnegative, summing to 1 within 1e-6.
struct AttentionMap {
    std::vector<double> weights;

    static AttentionMap from_weights(std::vector<double> weights);

    std::size_t size() const noexcept { return weights.size(); }
};

// Numerically stable softmax (max-subtraction) in double precision.
AttentionMap softmax_map(std::span<const double> logits);

// CLS-to-patch attention: weights_i = softmax_i(query . key_i / sqrt(d)).
// keys is an n x d row-major matrix; scale_dim must equal d.
AttentionMap softmax_attention(std::span<const float> query, std::span<const float> keys,
                               std::size_t n, int scale_dim);

// Deterministic miniature attention encoder: single-head, bias-free, no MLP
// blocks, no layer normalization. Weights are drawn from an xoshiro256**
// stream seeded via splitmix64, mapped to uniform(-0.1, 0.1); identical seed
// and shape parameters reproduce bit-identical weights.
class EncoderParams {
public:
    struct LayerWeights {
        std::vector<float> wq, wk, wv;  // dim x dim, row-major
    };

    static EncoderParams create(int dim, int layers, int vocab, uint64_t seed);

    int dim() const noexcept { return dim_; }
    int layers() const noexcept { return layers_; }
    int vocab() const noexcept { return vocab_; }
    uint64_t seed() const noexcept { return seed_; }

    const LayerWeights& layer(int l) const { return layer_weights_[l]; }
    std::span<const float> unembedding() const noexcept { return unembedding_; }
    std::span<const float> cls_embedding() const noexcept { return cls_embedding_; }

    // dim x patch_len projection from raw patch pixels to embeddings,
    // derived deterministically from the seed and patch_len.
    std::vector<float> patch_embedding(int patch_len) const;

private:
    int dim_ = 0, layers_ = 0, vocab_ = 0;
    uint64_t seed_ = 0;
    std::vector<LayerWeights> layer_weights_;
    std::vector<float> unembedding_;
    std::vector<float> cls_embedding_;
};

// Per-layer hidden states plus the CLS-to-patch attention map recorded at
// the second-to-last layer. hidden[l] is the sequence state after layer l,
// stored as a 1 x (n+1) grid with the CLS vector at index 0.
struct EncodedOutput {
    std::vector<TokenGrid> hidden;
    AttentionMap cls_attention_second_to_last;

    // Patch tokens of the final hidden state as a rows x cols grid.
    TokenGrid final_tokens(uint32_t rows, uint32_t cols) const;
};

// pixels holds one grid of layout (grid_side_px^2 floats, row-major).
EncodedOutput encode(std::span<const float> pixels, const EncoderParams& params,
                     const GridLayout& layout);

// logits = unembedding . hidden; argmax ties break toward the lowest index.
std::pair<int, std::vector<double>> logit_lens(std::span<const float> hidden_state,
                                               std::span<const float> unembedding, int vocab);

// Indices whose embedding norm deviates from the mean by more than two
// population standard deviations, ascending.
std::vector<int64_t> detect_register_tokens(const TokenGrid& grid);

}  // namespace tge
