#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tge/fixtures.hpp"
#include "tge/selection.hpp"

using namespace tge;

namespace {

AttentionMap map_of(std::vector<double> weights) {
    return AttentionMap::from_weights(std::move(weights));
}

SelectionConfig budget_config(int64_t budget) {
    SelectionConfig c;
    c.budget_override = budget;
    return c;
}

SelectionConfig ratio_config(double ratio) {
    SelectionConfig c;
    c.ratio_r = ratio;
    return c;
}

AffinityConfig affinity_with_threshold(double threshold, int steps = 3) {
    AffinityConfig c;
    c.join_threshold = threshold;
    c.steps_n = steps;
    return c;
}

}  // namespace

TEST_CASE("score_tokens ranks by weight with index tie-break") {
    SUBCASE("uniform map ranks by index") {
        const auto ranked = score_tokens(map_of({0.25, 0.25, 0.25, 0.25}));
        for (std::size_t i = 0; i < 4; ++i) CHECK(ranked[i].first == static_cast<int64_t>(i));
    }
    SUBCASE("mixed weights") {
        const auto ranked = score_tokens(map_of({0.1, 0.7, 0.2}));
        CHECK(ranked[0].first == 1);
        CHECK(ranked[1].first == 2);
        CHECK(ranked[2].first == 0);
    }
    SUBCASE("first entry carries the max weight") {
        Xoshiro256 rng(3);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 1 + rng.next_below(32);
            std::vector<double> raw(n);
            for (auto& v : raw) v = rng.uniform(0.0, 1.0);
            double sum = 0.0;
            for (double v : raw) sum += v;
            for (auto& v : raw) v /= sum;
            const double max_w = *std::max_element(raw.begin(), raw.end());
            const auto ranked = score_tokens(map_of(std::move(raw)));
            CHECK(ranked[0].second == max_w);
        }
    }
}

TEST_CASE("select_anchored keeps the top R tokens") {
    Xoshiro256 rng(11);
    SUBCASE("ratio 1 keeps everything in score order") {
        const auto tokens = testutil::random_vector(rng, 6 * 3);
        const AttentionMap map = map_of({0.1, 0.3, 0.05, 0.25, 0.2, 0.1});
        const RetainedTokens kept = select_anchored(tokens, 3, map, ratio_config(1.0));
        REQUIRE(kept.count() == 6);
        CHECK(kept.source_indices == std::vector<int64_t>{1, 3, 4, 0, 5, 2});
        for (std::size_t i = 1; i < kept.scores.size(); ++i) {
            CHECK(kept.scores[i] <= kept.scores[i - 1]);
        }
    }
    SUBCASE("ratio 0.3 of 10 strictly decreasing weights keeps {0,1,2}") {
        const auto tokens = testutil::random_vector(rng, 10 * 2);
        std::vector<double> weights(10);
        double sum = 0.0;
        for (int i = 0; i < 10; ++i) {
            weights[i] = 10.0 - i;
            sum += weights[i];
        }
        for (auto& w : weights) w /= sum;
        const RetainedTokens kept = select_anchored(tokens, 2, map_of(std::move(weights)),
                                                    ratio_config(0.3));
        CHECK(kept.source_indices == std::vector<int64_t>{0, 1, 2});
    }
    SUBCASE("absolute budget 24 of 576") {
        const auto tokens = testutil::random_vector(rng, 576 * 4);
        std::vector<double> weights(576, 1.0 / 576.0);
        const RetainedTokens kept =
            select_anchored(tokens, 4, map_of(std::move(weights)), budget_config(24));
        CHECK(kept.count() == 24);
    }
    SUBCASE("budget above n is rejected") {
        const auto tokens = testutil::random_vector(rng, 4 * 2);
        CHECK_THROWS_AS(
            select_anchored(tokens, 2, map_of({0.25, 0.25, 0.25, 0.25}), budget_config(5)),
            Error);
    }
    SUBCASE("retained embeddings are bit-exact copies") {
        const auto tokens = testutil::random_vector(rng, 8 * 5);
        std::vector<double> weights(8, 0.125);
        const RetainedTokens kept =
            select_anchored(tokens, 5, map_of(std::move(weights)), budget_config(3));
        for (std::size_t i = 0; i < kept.count(); ++i) {
            const auto src = kept.source_indices[i];
            CHECK(std::memcmp(kept.vector_of(i).data(),
                              tokens.data() + static_cast<std::size_t>(src) * 5,
                              5 * sizeof(float)) == 0);
        }
    }
}

TEST_CASE("select_anchored equals the full-sort oracle including ties") {
    Xoshiro256 rng(2025);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.next_below(512);
        std::vector<double> raw(n);
        for (auto& v : raw) {
            // coarse quantization forces plenty of ties
            v = 1.0 + static_cast<double>(rng.next_below(8));
        }
        double sum = 0.0;
        for (double v : raw) sum += v;
        for (auto& v : raw) v /= sum;
        const auto tokens = testutil::random_vector(rng, n * 2);
        const int64_t keep = 1 + static_cast<int64_t>(rng.next_below(n));
        const RetainedTokens kept =
            select_anchored(tokens, 2, map_of(std::vector<double>(raw)), budget_config(keep));
        const auto expected = oracle::top_k(raw, keep);
        REQUIRE(kept.source_indices == expected);
    }
}

TEST_CASE("selection is nested as the budget grows") {
    Xoshiro256 rng(31);
    const std::size_t n = 64;
    std::vector<double> raw(n);
    for (auto& v : raw) v = 1.0 + static_cast<double>(rng.next_below(5));
    double sum = 0.0;
    for (double v : raw) sum += v;
    for (auto& v : raw) v /= sum;
    const auto tokens = testutil::random_vector(rng, n * 3);
    std::vector<int64_t> previous;
    for (int64_t budget = 1; budget <= static_cast<int64_t>(n); ++budget) {
        const RetainedTokens kept =
            select_anchored(tokens, 3, map_of(std::vector<double>(raw)), budget_config(budget));
        std::vector<int64_t> sorted(kept.source_indices);
        std::sort(sorted.begin(), sorted.end());
        for (int64_t idx : previous) {
            CHECK(std::binary_search(sorted.begin(), sorted.end(), idx));
        }
        previous = sorted;
    }
}

TEST_CASE("retained set is invariant to logit shifts") {
    Xoshiro256 rng(5);
    const std::size_t n = 40, d = 6;
    const auto tokens = testutil::random_vector(rng, n * d);
    std::vector<double> logits(n);
    for (auto& l : logits) l = rng.uniform(-3.0, 3.0);
    const AttentionMap base = softmax_map(logits);
    for (auto& l : logits) l += 123.456;
    const AttentionMap shifted = softmax_map(logits);
    const auto kept_base = select_anchored(tokens, d, base, budget_config(10));
    const auto kept_shifted = select_anchored(tokens, d, shifted, budget_config(10));
    CHECK(kept_base.source_indices == kept_shifted.source_indices);
}

TEST_CASE("compress_grid runs pruning before selection") {
    SUBCASE("constant grid collapses below the budget") {
        const TokenGrid grid(24, 24, 8, std::vector<float>(24 * 24 * 8, 0.5f));
        EncodedOutput enc;
        enc.cls_attention_second_to_last = map_of(std::vector<double>(576, 1.0 / 576.0));
        const auto [retained, report] =
            compress_grid(grid, enc, affinity_with_threshold(0.85), budget_config(24));
        CHECK(retained.count() == 1);
        CHECK(report.retained_token_count == 1);
        CHECK(report.cluster_sizes == std::vector<int64_t>{576});
        CHECK(retained.scores[0] == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("singleton clustering reduces to pure anchored selection") {
        Xoshiro256 rng(17);
        const TokenGrid grid = testutil::random_grid(rng, 24, 24, 8);
        std::vector<double> logits(576);
        for (auto& l : logits) l = rng.uniform(-2.0, 2.0);
        EncodedOutput enc;
        enc.cls_attention_second_to_last = softmax_map(logits);

        const auto [retained, report] =
            compress_grid(grid, enc, affinity_with_threshold(1.0), budget_config(24));
        const RetainedTokens direct =
            select_anchored(grid.data(), 8, enc.cls_attention_second_to_last, budget_config(24));
        REQUIRE(retained.count() == 24);
        CHECK(retained.source_indices == direct.source_indices);
        CHECK(retained.vectors == direct.vectors);
        for (std::size_t i = 0; i < retained.count(); ++i) {
            CHECK(retained.scores[i] == doctest::Approx(direct.scores[i]).epsilon(1e-12));
        }
        CHECK(report.cluster_sizes.size() == 576);
    }
    SUBCASE("two-region structure fills the budget with verified member sums") {
        // left half one repeated direction, right half distinct noise tokens
        Xoshiro256 rng(23);
        const uint32_t rows = 12, cols = 12, dim = 8;
        std::vector<float> data(static_cast<std::size_t>(rows) * cols * dim);
        std::vector<float> shared = testutil::random_vector(rng, dim);
        for (uint32_t r = 0; r < rows; ++r) {
            for (uint32_t c = 0; c < cols; ++c) {
                float* dst = data.data() + (static_cast<std::size_t>(r) * cols + c) * dim;
                if (c < cols / 2) {
                    std::memcpy(dst, shared.data(), dim * sizeof(float));
                } else {
                    for (uint32_t d = 0; d < dim; ++d) {
                        dst[d] = static_cast<float>(rng.uniform(-1.0, 1.0));
                    }
                }
            }
        }
        const TokenGrid grid(rows, cols, dim, std::move(data));
        std::vector<double> logits(grid.token_count());
        for (auto& l : logits) l = rng.uniform(-1.0, 1.0);
        EncodedOutput enc;
        enc.cls_attention_second_to_last = softmax_map(logits);
        const auto affinity = affinity_with_threshold(0.9, 20);
        const int64_t budget = 24;
        const auto [retained, report] = compress_grid(grid, enc, affinity, budget_config(budget));
        REQUIRE(retained.count() == budget);

        // replay both stages independently
        const auto assignment = cluster_grid(grid, affinity);
        const auto pooled = pool_clusters(grid, assignment);
        REQUIRE(pooled.count() >= static_cast<std::size_t>(budget));
        std::vector<double> member_sums(pooled.count(), 0.0);
        for (std::size_t t = 0; t < grid.token_count(); ++t) {
            member_sums[assignment.cluster_of[t]] +=
                enc.cls_attention_second_to_last.weights[t];
        }
        const auto expected_order = oracle::top_k(member_sums, budget);
        for (std::size_t i = 0; i < retained.count(); ++i) {
            CHECK(retained.source_indices[i] ==
                  pooled.representative_index[expected_order[i]]);
            CHECK(retained.scores[i] ==
                  doctest::Approx(member_sums[expected_order[i]]).epsilon(1e-12));
        }
    }
    SUBCASE("attention length must match the grid") {
        const TokenGrid grid(2, 2, 2, std::vector<float>(8, 1.0f));
        EncodedOutput enc;
        enc.cls_attention_second_to_last = map_of({0.5, 0.5});
        CHECK_THROWS_AS(compress_grid(grid, enc, affinity_with_threshold(0.9), budget_config(2)),
                        Error);
    }
}

TEST_CASE("compress_image accounts tokens across the mosaic") {
    const GridLayout layout(672, 672, 336, 14);  // 2x2 grids of 576 tokens
    const EncoderParams params = EncoderParams::create(16, 3, 32, 42);
    std::vector<float> pixels(static_cast<std::size_t>(672) * 672);
    for (int64_t g = 0; g < 4; ++g) {
        const auto grid_pixels = mosaic_grid_pixels(layout, 42, g);
        const int64_t gr = g / 2, gc = g % 2;
        for (int y = 0; y < 336; ++y) {
            std::memcpy(pixels.data() + (gr * 336 + y) * 672 + gc * 336,
                        grid_pixels.data() + static_cast<std::size_t>(y) * 336,
                        336 * sizeof(float));
        }
    }

    SUBCASE("budget is enforced per grid") {
        const auto result =
            compress_image(pixels, layout, params, AffinityConfig{}, budget_config(24));
        CHECK(result.per_grid.size() == 4);
        CHECK(result.report.retained_token_count == 4 * 24);
        CHECK(result.report.original_token_count == 4 * 576);
        CHECK(result.report.tokens_per_grid == 24);
        CHECK(result.report.compression_ratio == doctest::Approx(24.0));
        // global indices are grid-offset locals
        for (std::size_t g = 0; g < 4; ++g) {
            for (std::size_t i = 0; i < 24; ++i) {
                const int64_t global = result.report.retained_indices[g * 24 + i];
                CHECK(global / 576 == static_cast<int64_t>(g));
                CHECK(global % 576 == result.per_grid[g].source_indices[i]);
            }
        }
    }
    SUBCASE("parallel execution reproduces the sequential result") {
        const auto seq =
            compress_image(pixels, layout, params, AffinityConfig{}, budget_config(24),
                           default_flops_model(), 1);
        const auto par =
            compress_image(pixels, layout, params, AffinityConfig{}, budget_config(24),
                           default_flops_model(), 4);
        CHECK(seq.report.retained_indices == par.report.retained_indices);
        CHECK(seq.report.cluster_sizes == par.report.cluster_sizes);
        for (std::size_t g = 0; g < 4; ++g) {
            CHECK(seq.per_grid[g].vectors == par.per_grid[g].vectors);
            CHECK(seq.per_grid[g].scores == par.per_grid[g].scores);
        }
    }
}

TEST_CASE("single grid identity pipeline") {
    const GridLayout layout(336, 336, 336, 14);
    const EncoderParams params = EncoderParams::create(16, 3, 32, 7);
    Xoshiro256 rng(3);
    const auto pixels = testutil::random_vector(rng, 336 * 336);
    SelectionConfig identity;
    identity.ratio_r = 1.0;
    const auto result =
        compress_image(pixels, layout, params, affinity_with_threshold(1.0), identity);
    CHECK(result.report.retained_token_count == 576);
    CHECK(result.report.compression_ratio == doctest::Approx(1.0));
}

TEST_CASE("mosaic fixture grids cluster well above the 24-token budget") {
    const GridLayout layout(8064, 8064, 336, 14);
    const EncoderParams params = EncoderParams::create(32, 3, 64, 42);
    for (const int64_t g : {0, 123, 575}) {
        const auto pixels = mosaic_grid_pixels(layout, 42, g);
        const EncodedOutput enc = encode(pixels, params, layout);
        const TokenGrid tokens = enc.final_tokens(24, 24);
        const auto assignment = cluster_grid(tokens, AffinityConfig{});
        CHECK(assignment.cluster_count >= 24 * 4);
    }
}
