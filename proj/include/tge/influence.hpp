#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tge/adapter.hpp"

namespace tge {

// Fixed Rademacher projection: entries are exactly +-1/sqrt(d_out), drawn
// from an xoshiro256** stream so identical (d_in, d_out, seed) reproduce the
// matrix bit for bit.
struct ProjectionSketch {
    int64_t d_in = 0;
    int64_t d_out = 0;
    uint64_t seed = 0;
    std::vector<float> matrix;  // d_out x d_in, row-major

    static ProjectionSketch build(int64_t d_in, int64_t d_out, uint64_t seed);
};

struct GradientFeature {
    std::string sample_id;
    std::vector<double> vec;  // d_out components
};

GradientFeature project_gradient(const ProjectionSketch& sketch, std::span<const double> grad,
                                 std::string sample_id);

// max over validation features of cos(train, x); cosine against a zero-norm
// vector is 0. Result clamped to [-1, 1].
double influence_score(const GradientFeature& train_feature,
                       std::span<const GradientFeature> val_features);

struct InfluenceEntry {
    std::string sample_id;
    double score;
};

struct InfluenceRanking {
    std::vector<InfluenceEntry> entries;  // score descending, ties by id ascending
    double keep_fraction = 0.7;
};

// Ranks every training feature and keeps the ceil(keep_fraction * N) prefix.
std::pair<InfluenceRanking, std::vector<std::string>> rank_and_select(
    std::span<const GradientFeature> train_features, std::span<const GradientFeature> val_features,
    double keep_fraction = 0.7);

struct FeaturizeResult {
    std::vector<GradientFeature> train;
    std::vector<GradientFeature> val;
    AdapterModel warmed_model;
};

// Warm-up: warmup_steps full-batch SGD steps on the crude training set, then
// per-sample adapter gradients at the warmed parameters, all projected
// through one shared sketch.
FeaturizeResult warmup_and_featurize(AdapterModel model, std::span<const DataSample> crude_train,
                                     std::span<const DataSample> validation, int warmup_steps,
                                     double lr, uint64_t sketch_seed, int64_t d_out);

}  // namespace tge
