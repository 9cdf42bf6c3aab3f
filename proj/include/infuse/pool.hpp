#pragma once

#include "infuse/adaboost.hpp"
#include "infuse/knn.hpp"
#include "infuse/matrix.hpp"
#include "infuse/svm.hpp"
#include "infuse/tree.hpp"

#include <array>
#include <cstdint>
#include <string_view>

namespace infuse {

inline constexpr std::size_t kBaseCount = 5;
inline constexpr std::size_t kPoolWidth = 2 * kBaseCount;

// Column order of the decision pool: each name contributes (normal, attack).
inline constexpr std::array<std::string_view, kBaseCount> kBaseNames = {"svm", "knn", "tree", "forest", "adaboost"};

struct PoolParams {
    SvmParams svm;
    std::size_t knn_k = 3;
    TreeParams tree;                                   // max_features 94
    ForestParams forest;                               // 39 estimators, max_features 12
    AdaboostParams adaboost;                           // 12 estimators
};

struct PoolSeeds {
    std::uint64_t svm = 0;
    std::uint64_t tree = 0;
    std::uint64_t forest = 0;
};

struct BasePool {
    SvmModel svm;
    KnnModel knn;
    TreeModel tree;
    ForestModel forest;
    AdaboostModel adaboost;
};

BasePool train_pool(const Matrix& x, const Labels& y, const PoolParams& params, const PoolSeeds& seeds);

// Stacks five attack-probability columns into the n x 10 pool.
Matrix stack_scores(std::span<const Vector> attack_probability);

// n x 10 decision pool Z, columns (svm_normal, svm_attack, knn_normal, ...).
Matrix pool_scores(const BasePool& pool, const Matrix& x);

// Per-classifier hard decision: attack when z_attack >= z_normal.
Labels base_predictions(const Matrix& z, std::size_t classifier);

} // namespace infuse
