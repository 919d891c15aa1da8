#include "tge/adapter.hpp"

#include <algorithm>
#include <cmath>

#include "tge/errors.hpp"
#include "tge/rng.hpp"

namespace tge {

namespace {

std::vector<double> softmax_probs(const std::vector<double>& logits) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - max_logit);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace

AdapterModel AdapterModel::create(int in_dim, int rank, int out_classes, uint64_t seed) {
    if (in_dim <= 0 || rank <= 0 || out_classes <= 0) {
        throw Error(ErrorKind::shape, "adapter dimensions must be positive");
    }
    if (rank >= std::min(in_dim, out_classes)) {
        throw Error(ErrorKind::shape, "adapter rank must be < min(in_dim, out_classes)");
    }
    AdapterModel m;
    m.in_dim = in_dim;
    m.rank = rank;
    m.out_classes = out_classes;
    Xoshiro256 rng(seed);
    m.base.resize(static_cast<std::size_t>(out_classes) * in_dim);
    m.factor_a.resize(static_cast<std::size_t>(rank) * in_dim);
    m.factor_b.resize(static_cast<std::size_t>(out_classes) * rank);
    for (auto& v : m.base) v = rng.uniform(-0.1, 0.1);
    for (auto& v : m.factor_a) v = rng.uniform(-0.1, 0.1);
    for (auto& v : m.factor_b) v = rng.uniform(-0.1, 0.1);
    return m;
}

std::vector<double> AdapterModel::logits(std::span<const float> features) const {
    if (features.size() != static_cast<std::size_t>(in_dim)) {
        throw Error(ErrorKind::shape, "feature length does not match adapter in_dim");
    }
    // (base + B.A) x  ==  base.x + B.(A.x)
    std::vector<double> ax(rank, 0.0);
    for (int r = 0; r < rank; ++r) {
        const double* row = factor_a.data() + static_cast<std::size_t>(r) * in_dim;
        double acc = 0.0;
        for (int i = 0; i < in_dim; ++i) acc += row[i] * features[i];
        ax[r] = acc;
    }
    std::vector<double> z(out_classes, 0.0);
    for (int c = 0; c < out_classes; ++c) {
        const double* brow = base.data() + static_cast<std::size_t>(c) * in_dim;
        double acc = 0.0;
        for (int i = 0; i < in_dim; ++i) acc += brow[i] * features[i];
        const double* lrow = factor_b.data() + static_cast<std::size_t>(c) * rank;
        for (int r = 0; r < rank; ++r) acc += lrow[r] * ax[r];
        z[c] = acc;
    }
    return z;
}

std::vector<double> AdapterModel::class_probabilities(std::span<const float> features) const {
    return softmax_probs(logits(features));
}

LossGrad adapter_loss_and_gradient(const AdapterModel& model, std::span<const float> features,
                                   int label) {
    if (label < 0 || label >= model.out_classes) {
        throw Error(ErrorKind::input, "label " + std::to_string(label) + " out of range");
    }
    const std::vector<double> z = model.logits(features);
    const double max_logit = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - max_logit);
    lse = max_logit + std::log(lse);

    LossGrad out;
    out.loss = lse - z[label];

    // dL/dz = p - e_label; dB = dz . (A x)^T; dA = B^T dz . x^T
    std::vector<double> dz(model.out_classes);
    for (int c = 0; c < model.out_classes; ++c) dz[c] = std::exp(z[c] - lse);
    dz[label] -= 1.0;

    std::vector<double> ax(model.rank, 0.0);
    for (int r = 0; r < model.rank; ++r) {
        const double* row = model.factor_a.data() + static_cast<std::size_t>(r) * model.in_dim;
        double acc = 0.0;
        for (int i = 0; i < model.in_dim; ++i) acc += row[i] * features[i];
        ax[r] = acc;
    }
    std::vector<double> btdz(model.rank, 0.0);
    for (int c = 0; c < model.out_classes; ++c) {
        const double* lrow = model.factor_b.data() + static_cast<std::size_t>(c) * model.rank;
        for (int r = 0; r < model.rank; ++r) btdz[r] += lrow[r] * dz[c];
    }

    out.grad.resize(model.grad_dim());
    double* ga = out.grad.data();
    for (int r = 0; r < model.rank; ++r) {
        for (int i = 0; i < model.in_dim; ++i) {
            ga[static_cast<std::size_t>(r) * model.in_dim + i] = btdz[r] * features[i];
        }
    }
    double* gb = out.grad.data() + static_cast<std::size_t>(model.rank) * model.in_dim;
    for (int c = 0; c < model.out_classes; ++c) {
        for (int r = 0; r < model.rank; ++r) {
            gb[static_cast<std::size_t>(c) * model.rank + r] = dz[c] * ax[r];
        }
    }
    return out;
}

AdapterModel sgd_step(AdapterModel model, std::span<const DataSample> batch, double lr) {
    if (batch.empty()) {
        throw Error(ErrorKind::input, "sgd_step on an empty batch");
    }
    if (lr < 0.0) {
        throw Error(ErrorKind::input, "learning rate must be nonnegative");
    }
    std::vector<double> mean(model.grad_dim(), 0.0);
    for (const auto& sample : batch) {
        const LossGrad lg = adapter_loss_and_gradient(model, sample.features, sample.label);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += lg.grad[i];
    }
    const double scale = lr / static_cast<double>(batch.size());
    const std::size_t a_len = model.factor_a.size();
    for (std::size_t i = 0; i < a_len; ++i) model.factor_a[i] -= scale * mean[i];
    for (std::size_t i = 0; i < model.factor_b.size(); ++i) {
        model.factor_b[i] -= scale * mean[a_len + i];
    }
    return model;
}

}  // namespace tge
