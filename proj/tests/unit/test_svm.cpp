#include "infuse/error.hpp"
#include "infuse/rng.hpp"
#include "infuse/svm.hpp"
#include "oracles/brute.hpp"

#include <doctest.h>

using namespace infuse;

namespace {

// Noisy XOR in the unit square, labels -1/+1.
void xor_problem(std::size_t n, std::uint64_t seed, Matrix& x, std::vector<int>& y) {
    Rng rng(seed);
    x.resize(static_cast<Eigen::Index>(n), 2);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        x(static_cast<Eigen::Index>(i), 0) = a;
        x(static_cast<Eigen::Index>(i), 1) = b;
        y[i] = ((a > 0.5) != (b > 0.5)) ? 1 : -1;
        if (rng.uniform() < 0.1) y[i] = -y[i];
    }
}

std::vector<double> q_matrix(const Matrix& x, const std::vector<int>& y, double gamma) {
    const std::size_t n = y.size();
    std::vector<double> q(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double d = 0.0;
            for (Eigen::Index k = 0; k < x.cols(); ++k) {
                const double t = x(static_cast<Eigen::Index>(i), k) - x(static_cast<Eigen::Index>(j), k);
                d += t * t;
            }
            q[i * n + j] = y[i] * y[j] * std::exp(-gamma * d);
        }
    }
    return q;
}

} // namespace

TEST_CASE("SMO dual objective matches the projected-gradient QP oracle") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        Matrix x;
        std::vector<int> y;
        xor_problem(40, seed, x, y);
        const double c = seed % 2 ? 1.0 : 10.0;
        const double gamma = 2.0;
        const auto smo = solve_smo(x, y, c, gamma, 1e-6);
        REQUIRE(smo.converged);
        const auto [alpha, obj] = oracle::solve_dual_qp(q_matrix(x, y, gamma), y, c);
        CHECK(oracle::dual_objective(q_matrix(x, y, gamma), smo.alpha) == doctest::Approx(smo.objective).epsilon(1e-9));
        CHECK(std::abs(smo.objective - obj) / std::abs(obj) < 1e-3);
        // SMO should be at least as good as the first-order oracle.
        CHECK(smo.objective <= obj + 1e-6 * std::abs(obj));
    }
}

TEST_CASE("SMO solution satisfies the KKT conditions") {
    Matrix x;
    std::vector<int> y;
    xor_problem(50, 9, x, y);
    const double c = 5.0, gamma = 3.0, eps = 1e-5;
    const auto r = solve_smo(x, y, c, gamma, eps);
    double balance = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(r.alpha[i] >= 0.0);
        CHECK(r.alpha[i] <= c);
        balance += y[i] * r.alpha[i];
    }
    CHECK(std::abs(balance) < 1e-9);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double f = r.b;
        for (std::size_t j = 0; j < y.size(); ++j) {
            f += r.alpha[j] * y[j] *
                 rbf_kernel(row_span(x, static_cast<Eigen::Index>(i)), row_span(x, static_cast<Eigen::Index>(j)), gamma);
        }
        const double margin = y[i] * f;
        if (r.alpha[i] < 1e-8) CHECK(margin >= 1.0 - 10 * eps);
        else if (r.alpha[i] > c - 1e-8) CHECK(margin <= 1.0 + 10 * eps);
        else CHECK(margin == doctest::Approx(1.0).epsilon(10 * eps));
    }
}

TEST_CASE("trained SVM separates a separable toy and round-trips") {
    Rng rng(4);
    Matrix x(200, 3);
    Labels y(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
        y[static_cast<std::size_t>(i)] = i % 2;
        for (Eigen::Index k = 0; k < 3; ++k) x(i, k) = rng.uniform(0, 0.4) + (i % 2 ? 0.6 : 0.0);
    }
    SvmParams params;
    params.c = 10;
    params.gamma = 1.0;
    const auto model = train_svm(x, y, params, 1);
    const Vector p = model.attack_probability(x);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < 200; ++i) correct += (p[i] >= 0.5) == (y[static_cast<std::size_t>(i)] == 1);
    CHECK(correct == 200);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);

    const auto back = SvmModel::deserialize(model.serialize());
    CHECK(back.decision(x) == model.decision(x));
    CHECK(back.attack_probability(x) == p);
    const auto again = train_svm(x, y, params, 1);
    CHECK(again.serialize() == model.serialize());
}

TEST_CASE("Platt scaling is monotone and calibrated in the right direction") {
    std::vector<double> dec;
    std::vector<int> pos;
    Rng rng(6);
    for (int i = 0; i < 500; ++i) {
        const int label = i % 2;
        dec.push_back((label ? 1.0 : -1.0) + rng.normal());
        pos.push_back(label);
    }
    const auto pl = fit_platt(dec, pos);
    CHECK(pl.a < 0.0);
    CHECK(pl.probability(2.0) > pl.probability(0.0));
    CHECK(pl.probability(0.0) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("subsampling respects the cap and class mix") {
    Labels y(1000);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i < 300 ? 1 : 0;
    const auto idx = stratified_subsample(y, 100, 3);
    CHECK(idx.size() == 100);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    std::size_t ones = 0;
    for (auto i : idx) ones += y[i];
    CHECK(ones == 30);
    CHECK(stratified_subsample(y, 5000, 3).size() == 1000);
}

TEST_CASE("SVM training errors") {
    Matrix x = Matrix::Zero(10, 2);
    CHECK_THROWS_AS(train_svm(x, Labels(10, 1), SvmParams{}, 0), TrainingError);
    SvmParams tiny;
    tiny.cap = 1;
    Labels y(10, 0);
    y[0] = 1;
    CHECK_THROWS_AS(train_svm(x, y, tiny, 0), TrainingError);
}
