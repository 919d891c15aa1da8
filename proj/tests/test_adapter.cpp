#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tge/adapter.hpp"

using namespace tge;

namespace {

AdapterModel fixture_model(uint64_t seed = 42) { return AdapterModel::create(16, 2, 4, seed); }

DataSample fixture_sample(Xoshiro256& rng, int in_dim, int classes) {
    DataSample s;
    s.id = "s";
    s.features = testutil::random_vector(rng, static_cast<std::size_t>(in_dim));
    s.label = static_cast<int>(rng.next_below(static_cast<uint64_t>(classes)));
    return s;
}

}  // namespace

TEST_CASE("uniform logits give loss ln(out_classes)") {
    AdapterModel m = fixture_model();
    std::fill(m.base.begin(), m.base.end(), 0.0);
    std::fill(m.factor_a.begin(), m.factor_a.end(), 0.0);
    std::fill(m.factor_b.begin(), m.factor_b.end(), 0.0);
    Xoshiro256 rng(1);
    const auto features = testutil::random_vector(rng, 16);
    const LossGrad lg = adapter_loss_and_gradient(m, features, 2);
    CHECK(lg.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences on 100 random cases") {
    Xoshiro256 rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        const int in_dim = 4 + static_cast<int>(rng.next_below(12));
        const int classes = 3 + static_cast<int>(rng.next_below(5));
        const int rank = 1 + static_cast<int>(rng.next_below(
                                 static_cast<uint64_t>(std::min(in_dim, classes) - 1)));
        const AdapterModel model = AdapterModel::create(in_dim, rank, classes, rng.next_u64());
        const DataSample sample = fixture_sample(rng, in_dim, classes);

        const LossGrad lg = adapter_loss_and_gradient(model, sample.features, sample.label);
        const auto fd = oracle::finite_difference_grad(model, sample.features, sample.label);
        REQUIRE(fd.size() == lg.grad.size());
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < fd.size(); ++i) {
            num += (fd[i] - lg.grad[i]) * (fd[i] - lg.grad[i]);
            den += fd[i] * fd[i];
        }
        REQUIRE(den > 0.0);
        CHECK(std::sqrt(num / den) < 1e-5);
    }
}

TEST_CASE("loss and gradient are deterministic per sample") {
    Xoshiro256 rng(5);
    const AdapterModel model = fixture_model(9);
    const DataSample sample = fixture_sample(rng, 16, 4);
    const LossGrad a = adapter_loss_and_gradient(model, sample.features, sample.label);
    const LossGrad b = adapter_loss_and_gradient(model, sample.features, sample.label);
    CHECK(a.loss == b.loss);
    CHECK(a.grad == b.grad);
}

TEST_CASE("label out of range is rejected") {
    const AdapterModel model = fixture_model();
    const std::vector<float> features(16, 0.5f);
    CHECK_THROWS_AS(adapter_loss_and_gradient(model, features, 4), Error);
    CHECK_THROWS_AS(adapter_loss_and_gradient(model, features, -1), Error);
    CHECK_THROWS_AS(adapter_loss_and_gradient(model, std::vector<float>(15, 0.0f), 1), Error);
}

TEST_CASE("model construction enforces the rank bound") {
    CHECK_THROWS_AS(AdapterModel::create(4, 4, 8, 0), Error);
    CHECK_THROWS_AS(AdapterModel::create(8, 4, 4, 0), Error);
    CHECK_NOTHROW(AdapterModel::create(8, 3, 4, 0));
}

TEST_CASE("sgd step behavior") {
    Xoshiro256 rng(7);
    const AdapterModel model = fixture_model(3);
    std::vector<DataSample> batch{fixture_sample(rng, 16, 4)};

    SUBCASE("zero learning rate leaves the model unchanged") {
        const AdapterModel stepped = sgd_step(model, batch, 0.0);
        CHECK(stepped.factor_a == model.factor_a);
        CHECK(stepped.factor_b == model.factor_b);
    }
    SUBCASE("single-sample loss does not increase for small lr") {
        for (const double lr : {1e-3, 1e-4, 1e-5}) {
            const AdapterModel stepped = sgd_step(model, batch, lr);
            const double before =
                adapter_loss_and_gradient(model, batch[0].features, batch[0].label).loss;
            const double after =
                adapter_loss_and_gradient(stepped, batch[0].features, batch[0].label).loss;
            CHECK(after <= before);
        }
    }
    SUBCASE("base stays bit-identical") {
        const AdapterModel stepped = sgd_step(model, batch, 0.1);
        CHECK(stepped.base == model.base);
        CHECK(stepped.factor_a != model.factor_a);
    }
    SUBCASE("empty batch rejected") {
        CHECK_THROWS_AS(sgd_step(model, std::span<const DataSample>{}, 0.1), Error);
    }
}
