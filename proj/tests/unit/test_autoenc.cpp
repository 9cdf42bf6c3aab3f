#include "infuse/autoenc.hpp"
#include "infuse/error.hpp"
#include "infuse/rng.hpp"
#include "oracles/finite_diff.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace infuse;

namespace {

Matrix unit_batch(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
    Rng rng(seed);
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    return x;
}

} // namespace

TEST_CASE("preset depths and latent widths") {
    const auto a = AeConfig::ae1();
    const auto b = AeConfig::ae2();
    CHECK(a.weight_layers() == 10);
    CHECK(a.latent_width() == 32);
    CHECK(a.learning_rate == 8e-5);
    CHECK(b.weight_layers() == 8);
    CHECK(b.latent_width() == 24);
    CHECK(b.learning_rate == 1e-4);
    const auto m = make_autoencoder(a, 122);
    CHECK(m.net.layers.size() == 10);
    CHECK(m.input_width() == 122);
    CHECK(m.net.output_width() == 122);
    CHECK(m.latent_width() == 32);
    CHECK(m.net.layers.back().act == Activation::sigmoid);
}

TEST_CASE("reconstruction gradient matches central differences") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 24; ++seed) {
        AeConfig cfg;
        cfg.encoder_widths = {7, 5, 3};
        cfg.weight_decay = 1e-3;
        cfg.seed = seed;
        auto model = make_autoencoder(cfg, 9);
        Rng rng(seed);
        for (auto& l : model.net.layers) {
            for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = rng.uniform(-0.1, 0.1);
        }
        const Matrix x = unit_batch(seed + 50, 6, 9);
        const auto analytic = ae_grad(model, x);
        CHECK(analytic.loss == doctest::Approx(ae_loss(model, x)).epsilon(1e-12));
        const auto numeric = oracle::numeric_gradient(model.net, [&](const DenseNet& net) {
            AeModel probe = model;
            probe.net = net;
            return ae_loss(probe, x);
        });
        worst = std::max(worst, oracle::max_relative_error(analytic.grad, numeric));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("loss is mean squared reconstruction plus the weight penalty") {
    AeConfig cfg;
    cfg.encoder_widths = {4, 2};
    cfg.weight_decay = 0.01;
    const auto model = make_autoencoder(cfg, 5);
    const Matrix x = unit_batch(3, 8, 5);
    const Matrix r = ae_forward(model, x).reconstruction;
    double sq = 0.0, w2 = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) sq += std::pow(r.data()[i] - x.data()[i], 2);
    for (const auto& l : model.net.layers) w2 += l.w.squaredNorm();
    CHECK(ae_loss(model, x) == doctest::Approx(sq / 8 + 0.01 * w2).epsilon(1e-12));
    CHECK(encode(model, x).cols() == 2);
    CHECK_THROWS_AS(encode(model, Matrix::Zero(1, 4)), ShapeError);
}

TEST_CASE("training reduces loss, is reproducible and round-trips") {
    AeConfig cfg;
    cfg.encoder_widths = {6, 3};
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 16;
    cfg.max_epochs = 30;
    cfg.patience = 5;
    cfg.seed = 9;
    // Rank-two data in eight dimensions.
    Rng rng(4);
    Matrix x(160, 8);
    for (Eigen::Index i = 0; i < 160; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        for (Eigen::Index k = 0; k < 8; ++k) x(i, k) = k % 2 ? a : 0.5 * (a + b);
    }
    const Matrix train = x.topRows(128), val = x.bottomRows(32);
    const auto before = ae_loss(make_autoencoder(cfg, 8), val);
    const auto fit = ae_fit(cfg, train, val);
    CHECK(ae_loss(fit.model, val) < before);
    REQUIRE(fit.curve.best_epoch >= 1);
    CHECK(fit.curve.epochs.size() <= 30);
    CHECK(fit.curve.epochs[fit.curve.best_epoch - 1].val_metric == doctest::Approx(ae_loss(fit.model, val)));
    const auto again = ae_fit(cfg, train, val);
    CHECK(again.model.serialize() == fit.model.serialize());
    CHECK(again.curve.to_csv() == fit.curve.to_csv());
    const auto back = AeModel::deserialize(fit.model.serialize());
    CHECK(encode(back, val) == encode(fit.model, val));
    auto bytes = fit.model.serialize();
    CHECK_THROWS(AeModel::deserialize(bytes + "x"));
}

TEST_CASE("non-finite training data is a training failure") {
    AeConfig cfg;
    cfg.encoder_widths = {3};
    cfg.max_epochs = 2;
    Matrix x = unit_batch(1, 20, 4);
    x(3, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ae_fit(cfg, x, unit_batch(2, 5, 4)), TrainingError);
}
