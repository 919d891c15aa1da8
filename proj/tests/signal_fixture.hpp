// Constructed ablation fixture: the target-class signal lives in a known
// 2x2 block of tokens (plus, in the diffuse variant, a weaker ring around
// it), background tokens are exactly orthogonal to the signal direction, and
// the proxy classifier reads the signal direction off the mean-pooled grid.
// The scale is chosen so the class probability sits in the responsive part
// of the softmax rather than the saturated tail.
#pragma once

#include <cmath>
#include <vector>

#include "tge/adapter.hpp"
#include "tge/analysis.hpp"
#include "tge/rng.hpp"
#include "tge/token_grid.hpp"

namespace testutil {

struct SignalFixture {
    tge::GridLayout layout{168, 168, 168, 14};  // 12x12 tokens
    tge::TokenGrid grid{1, 1, 1, {0.0f}};
    tge::AdapterModel proxy;
    std::vector<float> corpus_mean;
    tge::PixelBox bbox;  // covers the 2x2 signal core
    int target_class = 1;
    std::vector<int64_t> core_tokens;
};

inline SignalFixture make_signal_fixture(uint64_t seed, bool diffuse) {
    constexpr int kSide = 12;
    constexpr uint32_t kDim = 32;
    constexpr int kClasses = 4;
    constexpr double kCoreAmp = 8.0;
    constexpr double kRingAmp = 4.0;

    tge::Xoshiro256 rng(seed);

    std::vector<double> w(kDim);
    double wn = 0.0;
    for (auto& v : w) {
        v = rng.uniform(-1.0, 1.0);
        wn += v * v;
    }
    wn = std::sqrt(wn);
    for (auto& v : w) v /= wn;

    SignalFixture fx;
    fx.core_tokens = {5 * kSide + 5, 5 * kSide + 6, 6 * kSide + 5, 6 * kSide + 6};
    fx.bbox = tge::PixelBox{5 * 14, 5 * 14, 7 * 14, 7 * 14};

    const auto in_ring = [&](int64_t t) {
        const int64_t r = t / kSide, c = t % kSide;
        return r >= 4 && r <= 7 && c >= 4 && c <= 7;
    };

    double signal_mass = 0.0;
    std::vector<float> data(static_cast<std::size_t>(kSide) * kSide * kDim);
    for (int64_t t = 0; t < kSide * kSide; ++t) {
        double amp = 0.0;
        if (std::find(fx.core_tokens.begin(), fx.core_tokens.end(), t) != fx.core_tokens.end()) {
            amp = kCoreAmp;
        } else if (diffuse && in_ring(t)) {
            amp = kRingAmp;
        }
        float* dst = data.data() + static_cast<std::size_t>(t) * kDim;
        if (amp > 0.0) {
            signal_mass += amp;
            for (uint32_t d = 0; d < kDim; ++d) dst[d] = static_cast<float>(amp * w[d]);
        } else {
            // background: random, then exactly orthogonal to w
            std::vector<double> v(kDim);
            double dot = 0.0;
            for (uint32_t d = 0; d < kDim; ++d) {
                v[d] = rng.uniform(-1.0, 1.0);
                dot += v[d] * w[d];
            }
            for (uint32_t d = 0; d < kDim; ++d) dst[d] = static_cast<float>(v[d] - dot * w[d]);
        }
    }
    fx.grid = tge::TokenGrid(kSide, kSide, kDim, std::move(data), "signal-fixture");

    // corpus mean over all tokens, as the ablation substitution uses
    std::vector<double> acc(kDim, 0.0);
    for (std::size_t t = 0; t < fx.grid.token_count(); ++t) {
        const auto tok = fx.grid.token(t);
        for (uint32_t d = 0; d < kDim; ++d) acc[d] += tok[d];
    }
    fx.corpus_mean.resize(kDim);
    for (uint32_t d = 0; d < kDim; ++d) {
        fx.corpus_mean[d] = static_cast<float>(acc[d] / fx.grid.token_count());
    }

    // proxy reads w off the pooled embedding; beta puts the pre-ablation
    // logit near 4 so the probability can actually fall
    fx.proxy = tge::AdapterModel::create(kDim, 2, kClasses, seed);
    std::fill(fx.proxy.factor_a.begin(), fx.proxy.factor_a.end(), 0.0);
    std::fill(fx.proxy.factor_b.begin(), fx.proxy.factor_b.end(), 0.0);
    std::fill(fx.proxy.base.begin(), fx.proxy.base.end(), 0.0);
    const double beta = 4.0 * (kSide * kSide) / signal_mass;
    for (uint32_t d = 0; d < kDim; ++d) {
        fx.proxy.base[static_cast<std::size_t>(fx.target_class) * kDim + d] = beta * w[d];
    }
    return fx;
}

}  // namespace testutil
