#pragma once

#include "infuse/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace infuse {

class ByteReader;
class ByteWriter;

// Entropy in bits of a two-class count pair.
double entropy2(double n0, double n1);

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x[feature] <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double count0 = 0.0;        // training samples per class reaching the node
    double count1 = 0.0;
    double gain = 0.0;          // information gain of the split (internal nodes)

    bool leaf() const { return feature < 0; }
};

struct TreeParams {
    std::size_t max_features = 94;  // candidate (non-constant) features per split
    std::size_t min_leaf = 2;       // nodes with fewer samples are not split
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t width = 0;

    const TreeNode& leaf_for(std::span<const double> row) const;
    Vector attack_probability(const Matrix& x) const;

    void write(ByteWriter& w) const;
    static TreeModel read(ByteReader& r);
    std::string serialize() const;
    static TreeModel deserialize(std::string_view bytes);
};

// Greedy entropy splits at midpoints between consecutive distinct values.
// Equal gains prefer the lower feature index, then the lower threshold.
TreeModel train_tree(const Matrix& x, const Labels& y, const TreeParams& params, std::uint64_t seed);

// Same, on a multiset of rows (duplicates allowed, as in a bootstrap sample).
TreeModel train_tree_on(const Matrix& x, const Labels& y, std::span<const std::size_t> rows,
                        const TreeParams& params, std::uint64_t seed);

struct ForestParams {
    std::size_t estimators = 39;
    std::size_t max_features = 12;
    std::size_t min_leaf = 2;
};

struct ForestModel {
    std::vector<TreeModel> trees;
    std::vector<std::uint64_t> seeds;  // bootstrap seed per tree

    std::size_t width() const { return trees.empty() ? 0 : trees.front().width; }
    // Mean over trees of the leaf attack frequency.
    Vector attack_probability(const Matrix& x) const;

    std::string serialize() const;
    static ForestModel deserialize(std::string_view bytes);
};

ForestModel train_forest(const Matrix& x, const Labels& y, const ForestParams& params, std::uint64_t seed);

} // namespace infuse
