#include "infuse/error.hpp"
#include "infuse/knn.hpp"
#include "infuse/rng.hpp"
#include "oracles/brute.hpp"

#include <doctest.h>

#include <numeric>

using namespace infuse;

namespace {

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
    return out;
}

} // namespace

TEST_CASE("kNN scores match a brute-force sort, including ties and duplicates") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        Rng rng(seed);
        const Eigen::Index n = 150, d = 4;
        Matrix ref(n, d);
        Labels y(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < d; ++k) ref(i, k) = static_cast<double>(rng.below(5)) / 4.0;  // lattice: many ties
            y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
        }
        Matrix q(80, d);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            for (Eigen::Index k = 0; k < d; ++k) {
                q(i, k) = i % 3 == 0 ? ref(i, k) : static_cast<double>(rng.below(9)) / 8.0;
            }
        }
        const std::size_t k = 1 + seed % 5;
        const auto model = train_knn(ref, y, k);
        const Vector got = model.attack_probability(q);
        const auto ref_rows = rows_of(ref);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            const std::vector<double> qi(q.row(i).begin(), q.row(i).end());
            CHECK(got[i] == doctest::Approx(oracle::knn_score(ref_rows, y, qi, k)).epsilon(1e-12));
        }
    }
}

TEST_CASE("kNN is invariant to reference row order") {
    Rng rng(5);
    Matrix ref(60, 3);
    Labels y(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
        for (Eigen::Index k = 0; k < 3; ++k) ref(i, k) = static_cast<double>(rng.below(3));
        y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
    }
    std::vector<std::size_t> perm(60);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    const auto a = train_knn(ref, y, 3);
    const auto b = train_knn(select_rows(ref, perm), select(y, perm), 3);
    Matrix q(20, 3);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform(0, 2);
    CHECK(a.attack_probability(q) == b.attack_probability(q));
}

TEST_CASE("kNN serialization and argument checks") {
    Matrix ref(4, 2);
    ref << 0, 0, 1, 1, 2, 2, 3, 3;
    const Labels y{0, 0, 1, 1};
    const auto m = train_knn(ref, y, 3);
    const auto back = KnnModel::deserialize(m.serialize());
    CHECK(back.k == 3);
    CHECK(back.attack_probability(ref) == m.attack_probability(ref));
    CHECK(m.attack_probability(ref)[0] == 0.0);  // exact match
    CHECK_THROWS_AS(train_knn(ref, y, 0), TrainingError);
    CHECK_THROWS_AS(train_knn(ref, y, 5), TrainingError);
    CHECK_THROWS_AS(m.attack_probability(Matrix::Zero(1, 3)), ShapeError);
}
