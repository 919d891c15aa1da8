#include "tge/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "tge/rng.hpp"

namespace tge {

namespace {

void fill_uniform(Xoshiro256& rng, std::vector<float>& out) {
    for (auto& v : out) v = static_cast<float>(rng.uniform(-0.1, 0.1));
}

double dot_f(const float* a, const float* b, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

// out = mat . vec, mat is rows x cols row-major
void matvec_f(const float* mat, const float* vec, float* out, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        out[r] = static_cast<float>(dot_f(mat + static_cast<std::size_t>(r) * cols, vec, cols));
    }
}

}  // namespace

AttentionMap AttentionMap::from_weights(std::vector<double> weights) {
    if (weights.empty()) {
        throw Error(ErrorKind::shape, "attention map must not be empty");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) {
            throw Error(ErrorKind::numeric, "attention weight is negative or NaN");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw Error(ErrorKind::numeric,
                    "attention weights sum to " + std::to_string(sum) + ", expected 1");
    }
    return AttentionMap{std::move(weights)};
}

AttentionMap softmax_map(std::span<const double> logits) {
    if (logits.empty()) {
        throw Error(ErrorKind::shape, "softmax over an empty set");
    }
    double max_logit = logits[0];
    for (double l : logits) {
        if (!std::isfinite(l)) {
            throw Error(ErrorKind::numeric, "non-finite logit in softmax");
        }
        max_logit = std::max(max_logit, l);
    }
    std::vector<double> weights(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        weights[i] = std::exp(logits[i] - max_logit);
        sum += weights[i];
    }
    for (auto& w : weights) w /= sum;
    return AttentionMap{std::move(weights)};
}

AttentionMap softmax_attention(std::span<const float> query, std::span<const float> keys,
                               std::size_t n, int scale_dim) {
    const std::size_t d = query.size();
    if (d == 0 || n == 0 || keys.size() != n * d) {
        throw Error(ErrorKind::shape, "softmax_attention: keys matrix is not n x d");
    }
    if (scale_dim != static_cast<int>(d)) {
        throw Error(ErrorKind::shape, "softmax_attention: scale_dim must equal d");
    }
    for (float v : query) {
        if (!std::isfinite(v)) throw Error(ErrorKind::numeric, "non-finite query component");
    }
    for (float v : keys) {
        if (!std::isfinite(v)) throw Error(ErrorKind::numeric, "non-finite key component");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        logits[i] = scale * dot_f(query.data(), keys.data() + i * d, static_cast<int>(d));
    }
    return softmax_map(logits);
}

EncoderParams EncoderParams::create(int dim, int layers, int vocab, uint64_t seed) {
    if (dim <= 0 || vocab <= 0) {
        throw Error(ErrorKind::shape, "encoder dim and vocab must be positive");
    }
    if (layers < 2) {
        throw Error(ErrorKind::shape, "encoder needs at least 2 layers");
    }
    EncoderParams p;
    p.dim_ = dim;
    p.layers_ = layers;
    p.vocab_ = vocab;
    p.seed_ = seed;

    Xoshiro256 rng(seed);
    const std::size_t mat = static_cast<std::size_t>(dim) * dim;
    p.layer_weights_.resize(layers);
    for (auto& lw : p.layer_weights_) {
        lw.wq.resize(mat);
        lw.wk.resize(mat);
        lw.wv.resize(mat);
        fill_uniform(rng, lw.wq);
        fill_uniform(rng, lw.wk);
        fill_uniform(rng, lw.wv);
    }
    p.unembedding_.resize(static_cast<std::size_t>(vocab) * dim);
    fill_uniform(rng, p.unembedding_);
    p.cls_embedding_.resize(dim);
    fill_uniform(rng, p.cls_embedding_);
    return p;
}

std::vector<float> EncoderParams::patch_embedding(int patch_len) const {
    if (patch_len <= 0) {
        throw Error(ErrorKind::shape, "patch length must be positive");
    }
    // separate stream so the projection depends only on (seed, patch_len)
    Xoshiro256 rng(seed_ ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(patch_len)));
    std::vector<float> mat(static_cast<std::size_t>(dim_) * patch_len);
    fill_uniform(rng, mat);
    return mat;
}

TokenGrid EncodedOutput::final_tokens(uint32_t rows, uint32_t cols) const {
    const TokenGrid& last = hidden.back();
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (last.token_count() != n + 1) {
        throw Error(ErrorKind::shape, "encoded output does not match rows x cols patches");
    }
    const uint32_t dim = last.dim();
    std::vector<float> data(n * dim);
    std::copy(last.data().begin() + dim, last.data().end(), data.begin());
    return TokenGrid(rows, cols, dim, std::move(data));
}

EncodedOutput encode(std::span<const float> pixels, const EncoderParams& params,
                     const GridLayout& layout) {
    const int side = static_cast<int>(layout.grid_side_px);
    const int patch = static_cast<int>(layout.patch_px);
    const int m = static_cast<int>(layout.patches_per_side());
    const std::size_t n = static_cast<std::size_t>(m) * m;
    const int d = params.dim();
    const int patch_len = patch * patch;

    if (pixels.size() != static_cast<std::size_t>(side) * side) {
        throw Error(ErrorKind::shape, "pixel buffer does not match one grid of the layout");
    }

    // patchify + linear embed; sequence slot 0 is CLS
    const std::vector<float> embed = params.patch_embedding(patch_len);
    std::vector<float> state((n + 1) * d);
    std::copy(params.cls_embedding().begin(), params.cls_embedding().end(), state.begin());
    std::vector<float> patch_pixels(patch_len);
    for (int pr = 0; pr < m; ++pr) {
        for (int pc = 0; pc < m; ++pc) {
            for (int py = 0; py < patch; ++py) {
                const float* src = pixels.data() + (static_cast<std::size_t>(pr) * patch + py) * side +
                                   static_cast<std::size_t>(pc) * patch;
                std::copy(src, src + patch, patch_pixels.data() + static_cast<std::size_t>(py) * patch);
            }
            float* dst = state.data() + (static_cast<std::size_t>(pr) * m + pc + 1) * d;
            matvec_f(embed.data(), patch_pixels.data(), dst, d, patch_len);
        }
    }

    EncodedOutput out;
    out.hidden.reserve(params.layers());
    const std::size_t tokens = n + 1;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<float> q(tokens * d), k(tokens * d), v(tokens * d);
    std::vector<float> next(tokens * d);
    std::vector<double> logits(tokens);

    for (int l = 0; l < params.layers(); ++l) {
        const auto& w = params.layer(l);
        for (std::size_t t = 0; t < tokens; ++t) {
            const float* h = state.data() + t * d;
            matvec_f(w.wq.data(), h, q.data() + t * d, d, d);
            matvec_f(w.wk.data(), h, k.data() + t * d, d, d);
            matvec_f(w.wv.data(), h, v.data() + t * d, d, d);
        }

        if (l == params.layers() - 2) {
            // CLS-to-patch map over the patch keys only (sequence slots 1..n)
            out.cls_attention_second_to_last = softmax_attention(
                std::span<const float>(q.data(), d),
                std::span<const float>(k.data() + d, n * static_cast<std::size_t>(d)), n, d);
        }

        for (std::size_t i = 0; i < tokens; ++i) {
            const float* qi = q.data() + i * d;
            for (std::size_t j = 0; j < tokens; ++j) {
                logits[j] = scale * dot_f(qi, k.data() + j * d, d);
            }
            const AttentionMap attn = softmax_map(logits);
            float* dst = next.data() + i * d;
            const float* h = state.data() + i * d;
            for (int c = 0; c < d; ++c) dst[c] = h[c];
            for (std::size_t j = 0; j < tokens; ++j) {
                const float wj = static_cast<float>(attn.weights[j]);
                const float* vj = v.data() + j * d;
                for (int c = 0; c < d; ++c) dst[c] += wj * vj[c];
            }
        }
        state.swap(next);
        out.hidden.emplace_back(1, static_cast<uint32_t>(tokens), static_cast<uint32_t>(d),
                                std::vector<float>(state),
                                "layer:" + std::to_string(l));
    }
    return out;
}

std::pair<int, std::vector<double>> logit_lens(std::span<const float> hidden_state,
                                               std::span<const float> unembedding, int vocab) {
    const std::size_t d = hidden_state.size();
    if (vocab <= 0 || unembedding.size() != static_cast<std::size_t>(vocab) * d) {
        throw Error(ErrorKind::shape, "unembedding matrix is not vocab x d");
    }
    std::vector<double> logits(vocab);
    int best = 0;
    for (int t = 0; t < vocab; ++t) {
        logits[t] = dot_f(unembedding.data() + static_cast<std::size_t>(t) * d,
                          hidden_state.data(), static_cast<int>(d));
        if (logits[t] > logits[best]) best = t;
    }
    return {best, std::move(logits)};
}

std::vector<int64_t> detect_register_tokens(const TokenGrid& grid) {
    const std::size_t n = grid.token_count();
    if (n < 2) {
        throw Error(ErrorKind::statistics, "register detection needs at least 2 tokens");
    }
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto tok = grid.token(i);
        norms[i] = std::sqrt(dot_f(tok.data(), tok.data(), static_cast<int>(tok.size())));
    }
    double mean = 0.0;
    for (double v : norms) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : norms) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);  // population variance
    const double sigma = std::sqrt(var);

    std::vector<int64_t> outliers;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(norms[i] - mean) > 2.0 * sigma) {
            outliers.push_back(static_cast<int64_t>(i));
        }
    }
    return outliers;
}

}  // namespace tge
