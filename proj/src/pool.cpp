#include "infuse/pool.hpp"

#include "infuse/error.hpp"

#include <algorithm>
#include <string>

namespace infuse {

BasePool train_pool(const Matrix& x, const Labels& y, const PoolParams& params, const PoolSeeds& seeds) {
    BasePool pool;
    auto guarded = [](std::string_view name, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            throw TrainingError(std::string(name) + ": " + e.what());
        }
    };
    guarded("svm", [&] { pool.svm = train_svm(x, y, params.svm, seeds.svm); });
    guarded("knn", [&] { pool.knn = train_knn(x, y, params.knn_k); });
    guarded("tree", [&] { pool.tree = train_tree(x, y, params.tree, seeds.tree); });
    guarded("forest", [&] { pool.forest = train_forest(x, y, params.forest, seeds.forest); });
    guarded("adaboost", [&] { pool.adaboost = train_adaboost(x, y, params.adaboost); });
    return pool;
}

Matrix stack_scores(std::span<const Vector> attack_probability) {
    if (attack_probability.size() != kBaseCount) throw ShapeError("decision pool needs five score columns");
    const Eigen::Index n = attack_probability[0].size();
    Matrix z(n, static_cast<Eigen::Index>(kPoolWidth));
    for (std::size_t c = 0; c < kBaseCount; ++c) {
        if (attack_probability[c].size() != n) throw ShapeError("decision pool columns differ in length");
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = std::clamp(attack_probability[c][i], 0.0, 1.0);
            z(i, static_cast<Eigen::Index>(2 * c)) = 1.0 - p;
            z(i, static_cast<Eigen::Index>(2 * c + 1)) = p;
        }
    }
    return z;
}

Matrix pool_scores(const BasePool& pool, const Matrix& x) {
    const auto w = static_cast<std::size_t>(x.cols());
    if (pool.svm.width() != w || pool.knn.width() != w || pool.tree.width != w || pool.forest.width() != w ||
        pool.adaboost.width != w) {
        throw ShapeError("decision pool: model width does not match input width " + std::to_string(w));
    }
    const std::array<Vector, kBaseCount> cols = {
        pool.svm.attack_probability(x),    pool.knn.attack_probability(x),
        pool.tree.attack_probability(x),   pool.forest.attack_probability(x),
        pool.adaboost.attack_probability(x),
    };
    return stack_scores(cols);
}

Labels base_predictions(const Matrix& z, std::size_t classifier) {
    if (z.cols() != static_cast<Eigen::Index>(kPoolWidth) || classifier >= kBaseCount) {
        throw ShapeError("base_predictions needs a 10-column pool and a classifier index < 5");
    }
    Labels out(static_cast<std::size_t>(z.rows()));
    const auto c = static_cast<Eigen::Index>(classifier);
    for (Eigen::Index i = 0; i < z.rows(); ++i) out[static_cast<std::size_t>(i)] = z(i, 2 * c + 1) >= z(i, 2 * c) ? 1 : 0;
    return out;
}

} // namespace infuse
