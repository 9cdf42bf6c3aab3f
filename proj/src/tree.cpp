#include "infuse/tree.hpp"

#include "infuse/error.hpp"
#include "infuse/parallel.hpp"
#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace infuse {

namespace {

constexpr double kMinGain = 1e-12;

struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Scans every midpoint of one feature; returns false when the feature is
// constant over the node.
bool best_split_on_feature(const Matrix& x, const Labels& y, std::span<const std::size_t> rows, std::size_t feature,
                           double parent_h, double n0, double n1, std::vector<std::pair<double, int>>& buf,
                           Split& best) {
    buf.clear();
    for (auto r : rows) buf.emplace_back(x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(feature)), y[r]);
    std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (buf.front().first == buf.back().first) return false;
    const double n = n0 + n1;
    double l0 = 0.0;
    double l1 = 0.0;
    for (std::size_t i = 0; i + 1 < buf.size(); ++i) {
        (buf[i].second ? l1 : l0) += 1.0;
        if (buf[i].first == buf[i + 1].first) continue;
        const double nl = l0 + l1;
        const double nr = n - nl;
        const double gain = parent_h - (nl / n) * entropy2(l0, l1) - (nr / n) * entropy2(n0 - l0, n1 - l1);
        double thr = 0.5 * (buf[i].first + buf[i + 1].first);
        if (thr >= buf[i + 1].first) thr = buf[i].first;
        const auto f = static_cast<std::int32_t>(feature);
        const bool better = gain > best.gain ||
                            (gain == best.gain && best.feature >= 0 &&
                             (f < best.feature || (f == best.feature && thr < best.threshold)));
        if (better && gain > kMinGain) best = {f, thr, gain};
    }
    return true;
}

} // namespace

double entropy2(double n0, double n1) {
    const double n = n0 + n1;
    if (n <= 0.0) return 0.0;
    double h = 0.0;
    for (double c : {n0, n1}) {
        if (c > 0.0) {
            const double p = c / n;
            h -= p * std::log2(p);
        }
    }
    return h;
}

const TreeNode& TreeModel::leaf_for(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].leaf()) {
        const auto& nd = nodes[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
    }
    return nodes[i];
}

Vector TreeModel::attack_probability(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != width) throw ShapeError("tree input width mismatch");
    Vector out(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const auto& leaf = leaf_for(row_span(x, r));
        out[r] = leaf.count1 / (leaf.count0 + leaf.count1);
    }
    return out;
}

void TreeModel::write(ByteWriter& w) const {
    w.u64(width);
    w.u64(nodes.size());
    for (const auto& nd : nodes) {
        w.i64(nd.feature);
        w.f64(nd.threshold);
        w.i64(nd.left);
        w.i64(nd.right);
        w.f64(nd.count0);
        w.f64(nd.count1);
        w.f64(nd.gain);
    }
}

TreeModel TreeModel::read(ByteReader& r) {
    TreeModel t;
    t.width = r.u64();
    t.nodes.resize(r.u64());
    for (auto& nd : t.nodes) {
        nd.feature = static_cast<std::int32_t>(r.i64());
        nd.threshold = r.f64();
        nd.left = static_cast<std::int32_t>(r.i64());
        nd.right = static_cast<std::int32_t>(r.i64());
        nd.count0 = r.f64();
        nd.count1 = r.f64();
        nd.gain = r.f64();
    }
    const auto n = static_cast<std::int32_t>(t.nodes.size());
    if (n == 0) throw SchemaError("empty tree");
    for (const auto& nd : t.nodes) {
        if (!nd.leaf() && (nd.left <= 0 || nd.left >= n || nd.right <= 0 || nd.right >= n ||
                           static_cast<std::size_t>(nd.feature) >= t.width)) {
            throw SchemaError("tree node out of range");
        }
    }
    return t;
}

std::string TreeModel::serialize() const {
    ByteWriter w;
    write(w);
    return encode_infb(ModelType::tree, w.bytes());
}

TreeModel TreeModel::deserialize(std::string_view bytes) {
    const auto payload = decode_infb(bytes, ModelType::tree);
    ByteReader r(payload);
    return read(r);
}

TreeModel train_tree_on(const Matrix& x, const Labels& y, std::span<const std::size_t> rows,
                        const TreeParams& params, std::uint64_t seed) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("train_tree: label count mismatch");
    if (rows.empty()) throw TrainingError("tree needs at least one training row");
    const auto dim = static_cast<std::size_t>(x.cols());
    if (params.max_features < 1 || params.max_features > dim) throw TrainingError("tree max_features must be in [1, width]");

    TreeModel tree;
    tree.width = dim;
    Rng rng(seed);
    std::vector<std::size_t> order(dim);
    std::vector<std::pair<double, int>> buf;

    struct Pending {
        std::size_t node;
        std::vector<std::size_t> rows;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::vector<std::size_t>(rows.begin(), rows.end())});

    while (!stack.empty()) {
        Pending cur = std::move(stack.back());
        stack.pop_back();
        double n0 = 0.0;
        double n1 = 0.0;
        for (auto r : cur.rows) (y[r] ? n1 : n0) += 1.0;
        tree.nodes[cur.node].count0 = n0;
        tree.nodes[cur.node].count1 = n1;
        if (n0 == 0.0 || n1 == 0.0 || cur.rows.size() < params.min_leaf) continue;

        const double parent_h = entropy2(n0, n1);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (params.max_features < dim) rng.shuffle(std::span<std::size_t>(order));
        Split best;
        std::size_t visited = 0;
        for (std::size_t f : order) {
            if (visited >= params.max_features) break;
            if (best_split_on_feature(x, y, cur.rows, f, parent_h, n0, n1, buf, best)) ++visited;
        }
        if (best.feature < 0) continue;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto r : cur.rows) {
            (x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
        }
        const auto li = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& nd = tree.nodes[cur.node];
        nd.feature = best.feature;
        nd.threshold = best.threshold;
        nd.gain = best.gain;
        nd.left = li;
        nd.right = li + 1;
        // Right pushed first so the left subtree is expanded first.
        stack.push_back({static_cast<std::size_t>(li + 1), std::move(right)});
        stack.push_back({static_cast<std::size_t>(li), std::move(left)});
    }
    return tree;
}

TreeModel train_tree(const Matrix& x, const Labels& y, const TreeParams& params, std::uint64_t seed) {
    std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return train_tree_on(x, y, rows, params, seed);
}

Vector ForestModel::attack_probability(const Matrix& x) const {
    if (trees.empty()) throw ShapeError("empty forest");
    Vector sum = Vector::Zero(x.rows());
    for (const auto& t : trees) sum += t.attack_probability(x);
    return sum / static_cast<double>(trees.size());
}

std::string ForestModel::serialize() const {
    ByteWriter w;
    w.u64(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i) {
        w.u64(seeds[i]);
        trees[i].write(w);
    }
    return encode_infb(ModelType::forest, w.bytes());
}

ForestModel ForestModel::deserialize(std::string_view bytes) {
    const auto payload = decode_infb(bytes, ModelType::forest);
    ByteReader r(payload);
    ForestModel f;
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        f.seeds.push_back(r.u64());
        f.trees.push_back(TreeModel::read(r));
    }
    return f;
}

ForestModel train_forest(const Matrix& x, const Labels& y, const ForestParams& params, std::uint64_t seed) {
    if (params.estimators < 1) throw TrainingError("forest needs at least one estimator");
    if (x.rows() == 0) throw TrainingError("forest needs at least one training row");
    ForestModel forest;
    forest.trees.resize(params.estimators);
    forest.seeds.resize(params.estimators);
    const auto n = static_cast<std::size_t>(x.rows());
    const TreeParams tp{params.max_features, params.min_leaf};
    parallel_chunks(params.estimators, 1, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const auto s = derive_seed(seed, t);
            forest.seeds[t] = s;
            Rng boot(s);
            std::vector<std::size_t> rows(n);
            for (auto& r : rows) r = boot.below(n);
            forest.trees[t] = train_tree_on(x, y, rows, tp, derive_seed(s, 1));
        }
    });
    return forest;
}

} // namespace infuse
