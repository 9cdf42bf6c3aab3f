#pragma once

#include "infuse/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace infuse {

struct KsResult {
    double d = 0.0;
    std::size_t n = 0;
    std::size_t m = 0;
    double p_value = 1.0;
};

// Fraction of `sorted` that is <= x. `sorted` must be ascending.
double ecdf(std::span<const double> sorted, double x);

// Asymptotic Kolmogorov tail: 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2),
// truncated once a term drops below 1e-12, clamped to [0, 1].
double kolmogorov_tail(double lambda);

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

// Principal axes of a data set, found by power iteration with deflation on the
// sample covariance.
struct Projection {
    Vector mean;
    Matrix components;  // k x D, orthonormal rows
    Vector variances;   // eigenvalue of each component
};

Projection fit_projection(const Matrix& fit_on, std::size_t k, std::uint64_t seed);
Matrix apply_projection(const Projection& p, const Matrix& x);

// n x 2 coordinates of `matrix` on the top two components of `fit_on`.
Matrix project_2d(const Matrix& matrix, const Matrix& fit_on, std::uint64_t seed = 0);

struct FeatureShift {
    std::string feature;
    KsResult ks;
};

struct ShiftReport {
    std::vector<FeatureShift> features;
    KsResult summary;  // KS on the first principal component, fitted on train

    std::string to_csv() const;
    std::string to_json() const;
};

// KS per listed column (all columns when `columns` is empty) plus the scalar
// first-component summary. Names default to "c<index>".
ShiftReport shift_report(const Matrix& train, const Matrix& test, std::span<const std::size_t> columns = {},
                         std::span<const std::string> names = {}, std::uint64_t seed = 0);

} // namespace infuse
