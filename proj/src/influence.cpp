#include "tge/influence.hpp"

#include <algorithm>
#include <cmath>

#include "tge/errors.hpp"
#include "tge/rng.hpp"

namespace tge {

ProjectionSketch ProjectionSketch::build(int64_t d_in, int64_t d_out, uint64_t seed) {
    if (d_in < 1 || d_out < 1) {
        throw Error(ErrorKind::shape, "sketch dimensions must be >= 1");
    }
    ProjectionSketch s;
    s.d_in = d_in;
    s.d_out = d_out;
    s.seed = seed;
    const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(d_out)));
    s.matrix.resize(static_cast<std::size_t>(d_out) * d_in);
    Xoshiro256 rng(seed);
    for (auto& v : s.matrix) v = rng.next_sign() ? -scale : scale;
    return s;
}

GradientFeature project_gradient(const ProjectionSketch& sketch, std::span<const double> grad,
                                 std::string sample_id) {
    if (grad.size() != static_cast<std::size_t>(sketch.d_in)) {
        throw Error(ErrorKind::shape, "gradient length " + std::to_string(grad.size()) +
                                          " does not match sketch d_in " +
                                          std::to_string(sketch.d_in));
    }
    GradientFeature f;
    f.sample_id = std::move(sample_id);
    f.vec.resize(sketch.d_out);
    const std::size_t d_in = grad.size();
    for (int64_t o = 0; o < sketch.d_out; ++o) {
        const float* row = sketch.matrix.data() + static_cast<std::size_t>(o) * d_in;
        double acc = 0.0;
        for (std::size_t i = 0; i < d_in; ++i) acc += static_cast<double>(row[i]) * grad[i];
        f.vec[o] = acc;
    }
    return f;
}

namespace {

double norm_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

double influence_score(const GradientFeature& train_feature,
                       std::span<const GradientFeature> val_features) {
    if (val_features.empty()) {
        throw Error(ErrorKind::input, "influence score needs a nonempty validation set");
    }
    const double train_norm = norm_of(train_feature.vec);
    double best = -1.0;
    for (const auto& val : val_features) {
        if (val.vec.size() != train_feature.vec.size()) {
            throw Error(ErrorKind::shape, "feature dimensions differ between train and val");
        }
        const double val_norm = norm_of(val.vec);
        double cos = 0.0;  // zero-norm pairs score 0 by definition
        if (train_norm != 0.0 && val_norm != 0.0) {
            double acc = 0.0;
            for (std::size_t i = 0; i < val.vec.size(); ++i) {
                acc += train_feature.vec[i] * val.vec[i];
            }
            cos = acc / (train_norm * val_norm);
        }
        best = std::max(best, cos);
    }
    return std::clamp(best, -1.0, 1.0);
}

std::pair<InfluenceRanking, std::vector<std::string>> rank_and_select(
    std::span<const GradientFeature> train_features, std::span<const GradientFeature> val_features,
    double keep_fraction) {
    if (train_features.empty()) {
        throw Error(ErrorKind::input, "rank_and_select needs a nonempty training set");
    }
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw Error(ErrorKind::input, "keep_fraction must be in (0, 1]");
    }
    InfluenceRanking ranking;
    ranking.keep_fraction = keep_fraction;
    ranking.entries.reserve(train_features.size());
    for (const auto& train : train_features) {
        ranking.entries.push_back({train.sample_id, influence_score(train, val_features)});
    }
    std::sort(ranking.entries.begin(), ranking.entries.end(),
              [](const InfluenceEntry& a, const InfluenceEntry& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.sample_id < b.sample_id;
              });
    const auto keep = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(train_features.size())));
    std::vector<std::string> selected;
    selected.reserve(keep);
    for (std::size_t i = 0; i < keep && i < ranking.entries.size(); ++i) {
        selected.push_back(ranking.entries[i].sample_id);
    }
    return {std::move(ranking), std::move(selected)};
}

FeaturizeResult warmup_and_featurize(AdapterModel model, std::span<const DataSample> crude_train,
                                     std::span<const DataSample> validation, int warmup_steps,
                                     double lr, uint64_t sketch_seed, int64_t d_out) {
    if (crude_train.empty() || validation.empty()) {
        throw Error(ErrorKind::input, "warmup needs nonempty train and validation sets");
    }
    if (warmup_steps < 0) {
        throw Error(ErrorKind::input, "warmup_steps must be >= 0");
    }
    for (int step = 0; step < warmup_steps; ++step) {
        model = sgd_step(std::move(model), crude_train, lr);
    }

    const ProjectionSketch sketch = ProjectionSketch::build(model.grad_dim(), d_out, sketch_seed);
    auto featurize = [&](std::span<const DataSample> samples) {
        std::vector<GradientFeature> features;
        features.reserve(samples.size());
        for (const auto& s : samples) {
            const LossGrad lg = adapter_loss_and_gradient(model, s.features, s.label);
            features.push_back(project_gradient(sketch, lg.grad, s.id));
        }
        return features;
    };

    FeaturizeResult out;
    out.train = featurize(crude_train);
    out.val = featurize(validation);
    out.warmed_model = std::move(model);
    return out;
}

}  // namespace tge
