#pragma once

#include "infuse/matrix.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace infuse {

struct SvmParams {
    double c = 100.0;
    double gamma = 0.01;
    double eps = 1e-3;           // KKT tolerance (maximal violating pair gap)
    std::size_t cap = 20000;     // max training rows; stratified subsample above it
    double platt_holdout = 0.2;  // fraction held out for the sigmoid fit
    std::size_t cache_mb = 256;
    std::size_t max_iter = 50'000'000;
};

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double t = a[k] - b[k];
        d += t * t;
    }
    return std::exp(-gamma * d);
}

struct SmoResult {
    std::vector<double> alpha;
    double b = 0.0;          // decision f(x) = sum_i alpha_i y_i K(x_i, x) + b
    double objective = 0.0;  // 0.5 a'Qa - sum(a), Q_ij = y_i y_j K_ij
    std::size_t iterations = 0;
    bool converged = false;
};

// Solves the C-SVC dual with an RBF kernel by SMO using second-order working
// set selection. `y` holds -1/+1.
SmoResult solve_smo(const Matrix& x, std::span<const int> y, double c, double gamma, double eps,
                    std::size_t cache_mb = 256, std::size_t max_iter = 50'000'000);

struct PlattParams {
    double a = 0.0;
    double b = 0.0;

    // P(attack | decision value f) = 1 / (1 + exp(a f + b)).
    double probability(double f) const;
};

// Newton fit of the sigmoid with regularized targets. `positive` marks attack.
PlattParams fit_platt(std::span<const double> decision, std::span<const int> positive);

struct SvmModel {
    Matrix support;             // support vectors, one per row
    std::vector<double> coef;   // alpha_i * y_i
    double b = 0.0;
    double gamma = 0.01;
    double c = 100.0;
    PlattParams platt;

    std::size_t width() const { return static_cast<std::size_t>(support.cols()); }

    Vector decision(const Matrix& x) const;
    // Calibrated attack probability per row.
    Vector attack_probability(const Matrix& x) const;

    std::string serialize() const;
    static SvmModel deserialize(std::string_view bytes);
};

// Labels are 0 = normal, 1 = attack (mapped to -1/+1 internally).
SvmModel train_svm(const Matrix& x, const Labels& y, const SvmParams& params, std::uint64_t seed);

// Stratified subsample of at most `cap` row indices, sorted.
std::vector<std::size_t> stratified_subsample(const Labels& y, std::size_t cap, std::uint64_t seed);

} // namespace infuse
