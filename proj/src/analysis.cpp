#include "tge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "tge/encoder.hpp"
#include "tge/grid_io.hpp"
#include "tge/rng.hpp"

namespace tge {

namespace {

double cosine(std::span<const float> a, std::span<const float> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<float> mean_pooled(const TokenGrid& grid) {
    const uint32_t dim = grid.dim();
    std::vector<double> acc(dim, 0.0);
    for (std::size_t t = 0; t < grid.token_count(); ++t) {
        const auto tok = grid.token(t);
        for (uint32_t d = 0; d < dim; ++d) acc[d] += tok[d];
    }
    std::vector<float> out(dim);
    const double inv = 1.0 / static_cast<double>(grid.token_count());
    for (uint32_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d] * inv);
    return out;
}

}  // namespace

void BackgroundLexicon::validate() const {
    if (terms.empty()) {
        throw Error(ErrorKind::input, "background lexicon is empty");
    }
    const std::size_t d = terms.front().embedding.size();
    for (const auto& term : terms) {
        if (term.embedding.size() != d || d == 0) {
            throw Error(ErrorKind::shape, "lexicon embeddings have mixed dimensions");
        }
        for (float v : term.embedding) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::numeric, "non-finite lexicon embedding in term " +
                                                    term.label);
            }
        }
    }
}

double background_score(std::span<const float> token, const BackgroundLexicon& lexicon) {
    lexicon.validate();
    if (token.size() != lexicon.dim()) {
        throw Error(ErrorKind::shape, "token dimension does not match lexicon");
    }
    double best = -1.0;
    for (const auto& term : lexicon.terms) {
        best = std::max(best, cosine(token, term.embedding));
    }
    return std::clamp(best, -1.0, 1.0);
}

BackgroundLexicon load_lexicon(const std::filesystem::path& path) {
    const TokenGrid grid = load_grid(path);
    std::vector<std::string> labels;
    std::size_t start = 0;
    const std::string& tag = grid.tag();
    while (start < tag.size()) {
        const std::size_t semi = tag.find(';', start);
        const std::size_t end = semi == std::string::npos ? tag.size() : semi;
        if (end > start) labels.push_back(tag.substr(start, end - start));
        start = end + 1;
    }
    BackgroundLexicon lex;
    for (std::size_t t = 0; t < grid.token_count(); ++t) {
        const auto tok = grid.token(t);
        lex.terms.push_back({t < labels.size() ? labels[t] : "term" + std::to_string(t),
                             std::vector<float>(tok.begin(), tok.end())});
    }
    lex.validate();
    return lex;
}

PruneResult prune_background(const TokenGrid& grid, const BackgroundLexicon& lexicon,
                             double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(ErrorKind::input, "prune fraction must be in (0, 1)");
    }
    const std::size_t n = grid.token_count();
    std::vector<std::pair<int64_t, double>> scored(n);
    for (std::size_t t = 0; t < n; ++t) {
        scored[t] = {static_cast<int64_t>(t), background_score(grid.token(t), lexicon)};
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const auto drop_count = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(n)));
    std::vector<bool> dropped_mask(n, false);
    for (std::size_t i = 0; i < drop_count; ++i) {
        dropped_mask[static_cast<std::size_t>(scored[i].first)] = true;
    }
    PruneResult out;
    for (std::size_t t = 0; t < n; ++t) {
        (dropped_mask[t] ? out.dropped : out.retained).push_back(static_cast<int64_t>(t));
    }
    return out;
}

std::vector<int64_t> tokens_from_bbox(const PixelBox& bbox, const GridLayout& layout) {
    const int64_t side = layout.grid_side_px;
    const int64_t patch = layout.patch_px;
    const int64_t m = layout.patches_per_side();
    if (bbox.x0 < 0 || bbox.y0 < 0 || bbox.x1 > side || bbox.y1 > side || bbox.x0 > bbox.x1 ||
        bbox.y0 > bbox.y1) {
        throw Error(ErrorKind::input, "bbox outside the grid's pixel extent");
    }
    std::vector<int64_t> out;
    if (bbox.x0 == bbox.x1 || bbox.y0 == bbox.y1) return out;  // zero-area box
    for (int64_t pr = 0; pr < m; ++pr) {
        const int64_t py0 = pr * patch, py1 = py0 + patch;
        if (py1 <= bbox.y0 || py0 >= bbox.y1) continue;
        for (int64_t pc = 0; pc < m; ++pc) {
            const int64_t px0 = pc * patch, px1 = px0 + patch;
            if (px1 <= bbox.x0 || px0 >= bbox.x1) continue;
            out.push_back(pr * m + pc);
        }
    }
    return out;
}

std::vector<int64_t> buffer_ring(std::span<const int64_t> indices, const GridLayout& layout,
                                 int k) {
    if (k < 1) {
        throw Error(ErrorKind::input, "buffer distance must be >= 1");
    }
    const int64_t m = layout.patches_per_side();
    std::set<int64_t> expanded;
    for (int64_t idx : indices) {
        if (idx < 0 || idx >= m * m) {
            throw Error(ErrorKind::input, "token index " + std::to_string(idx) + " out of grid");
        }
        const int64_t r = idx / m, c = idx % m;
        for (int64_t dr = -k; dr <= k; ++dr) {
            for (int64_t dc = -k; dc <= k; ++dc) {
                const int64_t nr = r + dr, nc = c + dc;
                if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
                expanded.insert(nr * m + nc);
            }
        }
    }
    return std::vector<int64_t>(expanded.begin(), expanded.end());
}

void AblationSpec::validate() const {
    switch (kind) {
        case Kind::object:
        case Kind::object_buffer:
            if (!bbox) {
                throw Error(ErrorKind::input, "object ablation requires a bbox");
            }
            if (kind == Kind::object_buffer && buffer_k < 1) {
                throw Error(ErrorKind::input, "buffer distance must be >= 1");
            }
            break;
        case Kind::random:
            if (random_n < 1) {
                throw Error(ErrorKind::input, "random ablation requires n >= 1");
            }
            break;
        case Kind::register_tokens:
            break;
    }
}

const char* AblationSpec::kind_name(Kind k) {
    switch (k) {
        case Kind::object: return "object";
        case Kind::object_buffer: return "object_buffer";
        case Kind::register_tokens: return "register";
        case Kind::random: return "random";
    }
    return "unknown";
}

std::pair<TokenGrid, std::vector<int64_t>> ablate_tokens(const TokenGrid& grid,
                                                         const AblationSpec& spec,
                                                         std::span<const float> corpus_mean,
                                                         const GridLayout& layout) {
    spec.validate();
    if (corpus_mean.size() != grid.dim()) {
        throw Error(ErrorKind::shape, "corpus mean dimension does not match the grid");
    }
    const std::size_t n = grid.token_count();

    std::vector<int64_t> resolved;
    switch (spec.kind) {
        case AblationSpec::Kind::object:
            resolved = tokens_from_bbox(*spec.bbox, layout);
            break;
        case AblationSpec::Kind::object_buffer:
            resolved = buffer_ring(tokens_from_bbox(*spec.bbox, layout), layout, spec.buffer_k);
            break;
        case AblationSpec::Kind::register_tokens:
            resolved = detect_register_tokens(grid);
            break;
        case AblationSpec::Kind::random: {
            if (spec.random_n > static_cast<int64_t>(n)) {
                throw Error(ErrorKind::input, "random ablation count exceeds token count");
            }
            // partial Fisher-Yates over token indices, seeded
            std::vector<int64_t> pool(n);
            std::iota(pool.begin(), pool.end(), 0);
            Xoshiro256 rng(spec.seed);
            for (int64_t i = 0; i < spec.random_n; ++i) {
                const auto j = i + static_cast<int64_t>(rng.next_below(n - i));
                std::swap(pool[i], pool[j]);
            }
            resolved.assign(pool.begin(), pool.begin() + spec.random_n);
            std::sort(resolved.begin(), resolved.end());
            break;
        }
    }
    if (resolved.empty() && spec.kind != AblationSpec::Kind::register_tokens) {
        throw Error(ErrorKind::input, "ablation spec resolves to no tokens");
    }
    for (int64_t idx : resolved) {
        if (idx < 0 || idx >= static_cast<int64_t>(n)) {
            throw Error(ErrorKind::input, "resolved token index exceeds the grid");
        }
    }

    std::vector<float> data(grid.data().begin(), grid.data().end());
    for (int64_t idx : resolved) {
        std::memcpy(data.data() + static_cast<std::size_t>(idx) * grid.dim(), corpus_mean.data(),
                    grid.dim() * sizeof(float));
    }
    return {TokenGrid(grid.rows(), grid.cols(), grid.dim(), std::move(data), grid.tag()),
            std::move(resolved)};
}

AblationResult degradation_metric(const AdapterModel& proxy, const TokenGrid& grid_before,
                                  const TokenGrid& grid_after, int target_class) {
    if (grid_before.rows() != grid_after.rows() || grid_before.cols() != grid_after.cols() ||
        grid_before.dim() != grid_after.dim()) {
        throw Error(ErrorKind::shape, "before/after grids have different shapes");
    }
    if (target_class < 0 || target_class >= proxy.out_classes) {
        throw Error(ErrorKind::input, "target class out of range");
    }
    AblationResult out;
    out.metric_before = proxy.class_probabilities(mean_pooled(grid_before))[target_class];
    out.metric_after = proxy.class_probabilities(mean_pooled(grid_after))[target_class];
    if (out.metric_before == 0.0) {
        throw Error(ErrorKind::numeric, "metric before ablation is 0; decrease undefined");
    }
    out.decrease_percent = 100.0 * (out.metric_before - out.metric_after) / out.metric_before;
    return out;
}

}  // namespace tge
