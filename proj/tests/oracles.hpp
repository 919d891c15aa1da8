// Reference implementations used only by tests. Everything here is written
// independently of the library code paths it checks: brute force, full
// enumeration, finite differences, extended precision.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "tge/adapter.hpp"
#include "tge/token_grid.hpp"

namespace oracle {

// softmax of (q . k_i / sqrt(d)) in long double
inline std::vector<long double> softmax_attention(std::span<const float> query,
                                                  std::span<const float> keys, std::size_t n) {
    const std::size_t d = query.size();
    std::vector<long double> logits(n, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < d; ++j) {
            acc += static_cast<long double>(query[j]) * keys[i * d + j];
        }
        logits[i] = acc / std::sqrt(static_cast<long double>(d));
    }
    const long double m = *std::max_element(logits.begin(), logits.end());
    long double sum = 0.0L;
    for (auto& l : logits) {
        l = std::exp(l - m);
        sum += l;
    }
    for (auto& l : logits) l /= sum;
    return logits;
}

// full-sort top-k of (index, weight) with weight desc, index asc
inline std::vector<int64_t> top_k(std::span<const double> weights, int64_t k) {
    std::vector<int64_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
    long double dot = 0.0L, na = 0.0L, nb = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    if (na == 0.0L || nb == 0.0L) return 0.0;
    return static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

inline double cosine_f(std::span<const float> a, std::span<const float> b) {
    std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
    return cosine(da, db);
}

// connected components of the graph where p-s is an edge iff s is in the
// neighborhood of p and cos(v_p, v_s) >= threshold; labels ordered by each
// component's smallest member
inline std::vector<int64_t> connected_components(const tge::TokenGrid& grid, bool eight_connected,
                                                 double threshold) {
    const int64_t rows = grid.rows(), cols = grid.cols();
    const int64_t n = rows * cols;
    std::vector<int64_t> label(n, -1);
    int64_t next = 0;
    for (int64_t start = 0; start < n; ++start) {
        if (label[start] != -1) continue;
        const int64_t id = next++;
        std::vector<int64_t> stack{start};
        label[start] = id;
        while (!stack.empty()) {
            const int64_t t = stack.back();
            stack.pop_back();
            const int64_t r = t / cols, c = t % cols;
            for (int64_t dr = -1; dr <= 1; ++dr) {
                for (int64_t dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    if (!eight_connected && std::abs(dr) + std::abs(dc) != 1) continue;
                    const int64_t nr = r + dr, nc = c + dc;
                    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                    const int64_t nb = nr * cols + nc;
                    if (label[nb] != -1) continue;
                    if (cosine_f(grid.token(static_cast<std::size_t>(t)),
                                 grid.token(static_cast<std::size_t>(nb))) >= threshold) {
                        label[nb] = id;
                        stack.push_back(nb);
                    }
                }
            }
        }
    }
    return label;
}

// central finite differences of the adapter loss over the factor entries
inline std::vector<double> finite_difference_grad(tge::AdapterModel model,
                                                  std::span<const float> features, int label,
                                                  double h = 1e-4) {
    const auto loss_of = [&](const tge::AdapterModel& m) {
        return tge::adapter_loss_and_gradient(m, features, label).loss;
    };
    std::vector<double> grad(model.grad_dim());
    std::size_t g = 0;
    for (std::size_t i = 0; i < model.factor_a.size(); ++i, ++g) {
        const double saved = model.factor_a[i];
        model.factor_a[i] = saved + h;
        const double up = loss_of(model);
        model.factor_a[i] = saved - h;
        const double down = loss_of(model);
        model.factor_a[i] = saved;
        grad[g] = (up - down) / (2.0 * h);
    }
    for (std::size_t i = 0; i < model.factor_b.size(); ++i, ++g) {
        const double saved = model.factor_b[i];
        model.factor_b[i] = saved + h;
        const double up = loss_of(model);
        model.factor_b[i] = saved - h;
        const double down = loss_of(model);
        model.factor_b[i] = saved;
        grad[g] = (up - down) / (2.0 * h);
    }
    return grad;
}

// closed-form least squares in long double
inline std::pair<double, double> least_squares(
    std::span<const std::pair<int64_t, double>> rows) {
    long double mx = 0.0L, my = 0.0L;
    for (const auto& [x, y] : rows) {
        mx += static_cast<long double>(x);
        my += static_cast<long double>(y);
    }
    mx /= static_cast<long double>(rows.size());
    my /= static_cast<long double>(rows.size());
    long double sxx = 0.0L, sxy = 0.0L;
    for (const auto& [x, y] : rows) {
        const long double dx = static_cast<long double>(x) - mx;
        sxx += dx * dx;
        sxy += dx * (static_cast<long double>(y) - my);
    }
    const long double slope = sxy / sxx;
    return {static_cast<double>(slope), static_cast<double>(my - slope * mx)};
}

// Chebyshev dilation by direct distance test over every lattice cell
inline std::vector<int64_t> dilate(std::span<const int64_t> indices, int64_t m, int64_t k) {
    std::set<int64_t> out;
    for (int64_t r = 0; r < m; ++r) {
        for (int64_t c = 0; c < m; ++c) {
            for (int64_t idx : indices) {
                const int64_t ir = idx / m, ic = idx % m;
                if (std::max(std::abs(r - ir), std::abs(c - ic)) <= k) {
                    out.insert(r * m + c);
                    break;
                }
            }
        }
    }
    return {out.begin(), out.end()};
}

// pixel-overlap enumeration: token indices whose patch intersects the box
inline std::vector<int64_t> bbox_tokens(int64_t x0, int64_t y0, int64_t x1, int64_t y1,
                                        int64_t m, int64_t patch) {
    std::vector<int64_t> out;
    for (int64_t t = 0; t < m * m; ++t) {
        const int64_t pr = t / m, pc = t % m;
        bool hit = false;
        for (int64_t y = pr * patch; y < (pr + 1) * patch && !hit; ++y) {
            for (int64_t x = pc * patch; x < (pc + 1) * patch && !hit; ++x) {
                if (x >= x0 && x < x1 && y >= y0 && y < y1) hit = true;
            }
        }
        if (hit) out.push_back(t);
    }
    return out;
}

// rank by (score desc, id asc) then take the ceil(fraction N) prefix
inline std::vector<std::string> rank_prefix(std::vector<std::pair<std::string, double>> scored,
                                            double fraction) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const auto keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(scored.size())));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < keep && i < scored.size(); ++i) ids.push_back(scored[i].first);
    return ids;
}

}  // namespace oracle
