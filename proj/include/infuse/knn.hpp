#pragma once

#include "infuse/matrix.hpp"

#include <string>
#include <string_view>

namespace infuse {

// Inverse-distance weighted k nearest neighbours under Euclidean distance.
//
// Neighbour ties at equal distance are broken by label, then by the
// lexicographic order of the reference row, so the result never depends on
// the order of the reference rows. When any reference lies at distance zero
// from the query, the zero-distance references alone decide the score.
struct KnnModel {
    Matrix reference;
    Labels labels;
    std::size_t k = 3;

    std::size_t width() const { return static_cast<std::size_t>(reference.cols()); }

    // Weighted attack share among the neighbours, per query row.
    Vector attack_probability(const Matrix& queries) const;

    std::string serialize() const;
    static KnnModel deserialize(std::string_view bytes);
};

KnnModel train_knn(const Matrix& x, const Labels& y, std::size_t k = 3);

} // namespace infuse
