#include "infuse/error.hpp"
#include "infuse/meta.hpp"
#include "infuse/pool.hpp"
#include "infuse/rng.hpp"
#include "oracles/finite_diff.hpp"

#include <doctest.h>

#include <cmath>

using namespace infuse;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d) {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    return m;
}

Labels random_labels(Rng& rng, std::size_t n) {
    Labels y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    return y;
}

// Pool with attack columns `a` and matching normal columns.
Matrix pool_from(const std::vector<std::vector<double>>& attack) {
    Matrix z(static_cast<Eigen::Index>(attack.size()), 10);
    for (std::size_t i = 0; i < attack.size(); ++i) {
        for (std::size_t c = 0; c < 5; ++c) {
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * c + 1)) = attack[i][c];
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * c)) = 1 - attack[i][c];
        }
    }
    return z;
}

} // namespace

TEST_CASE("hybrid layout, slicing and ablation subsets") {
    Rng rng(1);
    const Matrix z = random_matrix(rng, 4, 10), x = random_matrix(rng, 4, 122), l1 = random_matrix(rng, 4, 32),
                 l2 = random_matrix(rng, 4, 24);
    const auto h = build_hybrid(z, x, l1, l2);
    CHECK(h.f.cols() == 188);
    CHECK(h.layout.total() == 188);
    CHECK(slice_block(h, Block::z) == z);
    CHECK(slice_block(h, Block::x) == x);
    CHECK(slice_block(h, Block::l1) == l1);
    CHECK(slice_block(h, Block::l2) == l2);
    const std::vector<Block> reversed{Block::l1, Block::z};
    const Matrix sel = select_blocks(h, reversed);
    CHECK(sel.leftCols(10) == z);
    CHECK(sel.rightCols(32) == l1);
    CHECK_THROWS_AS(build_hybrid(z, x.topRows(3), l1, l2), ShapeError);

    const auto& sets = ablation_block_sets();
    REQUIRE(sets.size() == 5);
    CHECK(sets[full_block_set_index()].blocks.size() == 4);
    CHECK(sets.front().name == "Z");
}

TEST_CASE("meta-learner depth and output") {
    MetaNetConfig cfg;
    CHECK(cfg.weight_layers() == 6);
    const auto m = make_meta(cfg, 188);
    CHECK(m.net.layers.size() == 6);
    CHECK(m.net.output_width() == 1);
    CHECK(m.net.layers.back().act == Activation::sigmoid);
    Rng rng(2);
    const Vector p = meta_predict(m, random_matrix(rng, 50, 188));
    for (Eigen::Index i = 0; i < p.size(); ++i) CHECK((p[i] > 0.0 && p[i] < 1.0));
    CHECK(MetaModel::deserialize(m.serialize()).serialize() == m.serialize());
    CHECK_THROWS_AS(meta_predict(m, Matrix::Zero(2, 10)), ShapeError);
}

TEST_CASE("forward pass equals explicit matrix products") {
    MetaNetConfig cfg;
    cfg.hidden = {6, 4};
    cfg.seed = 3;
    const auto m = make_meta(cfg, 5);
    Rng rng(3);
    const Matrix f = random_matrix(rng, 7, 5);
    Matrix a = f;
    for (std::size_t l = 0; l < m.net.layers.size(); ++l) {
        const auto& layer = m.net.layers[l];
        a = (a * layer.w.transpose()).rowwise() + layer.b.transpose();
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            double& v = a.data()[i];
            v = l + 1 < m.net.layers.size() ? std::max(0.0, v) : 1 / (1 + std::exp(-v));
        }
    }
    const Vector p = meta_predict(m, f);
    for (Eigen::Index i = 0; i < 7; ++i) CHECK(p[i] == doctest::Approx(a(i, 0)).epsilon(1e-12));
}

TEST_CASE("cross-entropy gradient matches central differences") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 24; ++seed) {
        MetaNetConfig cfg;
        cfg.hidden = {6, 4, 3};
        cfg.seed = seed;
        auto m = make_meta(cfg, 5);
        Rng rng(seed);
        for (auto& l : m.net.layers) {
            for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = rng.uniform(-0.1, 0.1);
        }
        const Matrix f = random_matrix(rng, 8, 5);
        const Labels y = random_labels(rng, 8);
        const auto g = meta_grad(m, f, y);
        CHECK(g.loss == doctest::Approx(meta_loss(m, f, y)).epsilon(1e-12));
        const auto numeric = oracle::numeric_gradient(m.net, [&](const DenseNet& net) {
            MetaModel probe{net};
            return meta_loss(probe, f, y);
        });
        worst = std::max(worst, oracle::max_relative_error(g.grad, numeric));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("single-layer gradient is (p - y) times the input") {
    MetaNetConfig cfg;
    cfg.hidden = {};
    const auto m = make_meta(cfg, 3);
    Matrix f(2, 3);
    f << 1, 2, 3, -1, 0.5, 0;
    const Labels y{1, 0};
    const Vector p = meta_predict(m, f);
    const auto g = meta_grad(m, f, y);
    for (Eigen::Index k = 0; k < 3; ++k) {
        const double expect = ((p[0] - 1) * f(0, k) + p[1] * f(1, k)) / 2;
        CHECK(g.grad.w[0](0, k) == doctest::Approx(expect));
    }
    CHECK(g.grad.b[0][0] == doctest::Approx(((p[0] - 1) + p[1]) / 2));
}

TEST_CASE("training on one class drives probabilities toward it") {
    MetaNetConfig cfg;
    cfg.hidden = {};
    cfg.learning_rate = 2.0;
    cfg.batch_size = 8;
    cfg.max_epochs = 30;
    cfg.patience = 30;
    Rng rng(4);
    const Matrix f = random_matrix(rng, 40, 3);
    const Labels zeros(40, 0);
    const auto fit = meta_fit(cfg, f, zeros, f, zeros);
    const Vector p = meta_predict(fit.model, f);
    for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p[i] < 0.5);
}

TEST_CASE("meta training learns a separable rule and is reproducible") {
    MetaNetConfig cfg;
    cfg.hidden = {8, 4};
    cfg.learning_rate = 0.3;
    cfg.batch_size = 16;
    cfg.max_epochs = 80;
    cfg.patience = 80;
    cfg.seed = 5;
    Rng rng(5);
    const Matrix f = random_matrix(rng, 200, 2);
    Labels y(200);
    for (Eigen::Index i = 0; i < 200; ++i) y[static_cast<std::size_t>(i)] = f(i, 0) + f(i, 1) > 1.0;
    const auto fit = meta_fit(cfg, f, y, f, y);
    const Labels pred = threshold_labels(meta_predict(fit.model, f));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
    CHECK(correct >= 180);
    CHECK(fit.curve.metric_name == "val_f_score");
    CHECK(meta_fit(cfg, f, y, f, y).model.serialize() == fit.model.serialize());
}

TEST_CASE("threshold convention") {
    Vector p(3);
    p << 0.5, 0.4999, 0.9;
    CHECK(threshold_labels(p) == Labels{1, 0, 1});
}

TEST_CASE("voting baselines") {
    const Matrix z = pool_from({{0.9, 0.9, 0.9, 0.1, 0.1},
                                {0.6, 0.6, 0.1, 0.1, 0.1},
                                {0.2, 0.2, 0.2, 0.2, 0.2},
                                {0.51, 0.51, 0.51, 0.0, 0.0}});
    CHECK(vote_majority(z) == Labels{1, 0, 0, 1});
    CHECK(vote_average(z) == Labels{1, 0, 0, 0});
    const std::vector<double> uniform(5, 0.2);
    CHECK(vote_max_weighted(z, uniform) == vote_average(z));
    const std::vector<double> only_third{0, 0, 1, 0, 0};
    const Labels third = vote_max_weighted(z, only_third);
    for (std::size_t i = 0; i < third.size(); ++i) CHECK(third[i] == base_predictions(z, 2)[i]);

    const Labels y{1, 0, 0, 1};
    const auto w = accuracy_weights(z, y);
    double total = 0;
    for (double v : w) total += v;
    CHECK(total == doctest::Approx(1.0));
    CHECK(w[0] == doctest::Approx(w[1]));
    CHECK(w[0] > w[3]);
}
