#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tge {

struct DataSample {
    std::string id;
    std::vector<float> features;
    int label = 0;
};

// Low-rank adapter classifier: logits = (base + factor_b . factor_a) . x.
// base is frozen; only the factors are trainable. Stand-in for adapter-only
// fine-tuning at desk scale.
struct AdapterModel {
    int in_dim = 0;
    int rank = 0;
    int out_classes = 0;
    std::vector<double> factor_a;  // rank x in_dim, row-major
    std::vector<double> factor_b;  // out_classes x rank, row-major
    std::vector<double> base;      // out_classes x in_dim, row-major, frozen

    static AdapterModel create(int in_dim, int rank, int out_classes, uint64_t seed);

    // gradient length: factor_a then factor_b, both row-major
    int64_t grad_dim() const noexcept {
        return static_cast<int64_t>(rank) * in_dim + static_cast<int64_t>(out_classes) * rank;
    }

    std::vector<double> logits(std::span<const float> features) const;
    std::vector<double> class_probabilities(std::span<const float> features) const;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // factor_a row-major, then factor_b row-major
};

// Negative log-likelihood loss and its exact analytic gradient with respect
// to the adapter factors only.
LossGrad adapter_loss_and_gradient(const AdapterModel& model, std::span<const float> features,
                                   int label);

// One full-batch SGD step on the factors: -lr * mean gradient. base frozen.
AdapterModel sgd_step(AdapterModel model, std::span<const DataSample> batch, double lr);

}  // namespace tge
