#pragma once

// Straight-line reference implementations used only by the tests. Each one
// is deliberately naive so that it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

// Two-sample KS statistic by evaluating both ECDFs at every pooled point.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    double d = 0.0;
    for (double x : pooled) {
        std::size_t i = 0, j = 0;
        for (double v : a) i += v <= x;
        for (double v : b) j += v <= x;
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                                 static_cast<double>(j) / static_cast<double>(b.size())));
    }
    return d;
}

// Mann-Whitney form of the ROC AUC: concordant positive/negative pairs, ties
// counted one half.
inline double pairwise_auc(std::span<const int> y, std::span<const double> s) {
    double concordant = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[j] != 0) continue;
            pairs += 1.0;
            concordant += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return concordant / pairs;
}

// Cyclic Jacobi rotations for a small symmetric matrix (row-major n x n).
// Returns eigenvalues descending with matching unit eigenvectors (rows).
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(std::vector<double> a,
                                                                                      std::size_t n) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
    for (auto i : order) {
        values.push_back(a[i * n + i]);
        std::vector<double> col(n);
        for (std::size_t k = 0; k < n; ++k) col[k] = v[k * n + i];
        vectors.push_back(col);
    }
    return {values, vectors};
}

// C-SVC dual by accelerated projected gradient. The feasible set
// {0 <= a <= C, y'a = 0} is projected onto by bisection on the multiplier of
// the equality constraint. Q is n x n row-major with Q_ij = y_i y_j K_ij.
inline double dual_objective(const std::vector<double>& q, const std::vector<double>& a) {
    const std::size_t n = a.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double qi = 0.0;
        for (std::size_t j = 0; j < n; ++j) qi += q[i * n + j] * a[j];
        s += 0.5 * a[i] * qi - a[i];
    }
    return s;
}

inline std::vector<double> project_box_hyperplane(const std::vector<double>& v, const std::vector<int>& y, double c) {
    auto at = [&](double tau) {
        std::vector<double> a(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - tau * y[i], 0.0, c);
        return a;
    };
    auto residual = [&](double tau) {
        const auto a = at(tau);
        double r = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) r += y[i] * a[i];
        return r;
    };
    double lo = -1e6, hi = 1e6;  // residual is non-increasing in tau
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (residual(mid) > 0 ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
}

inline std::pair<std::vector<double>, double> solve_dual_qp(const std::vector<double>& q, const std::vector<int>& y,
                                                            double c, int iterations = 40000) {
    const std::size_t n = y.size();
    // Lipschitz constant bounded by the largest absolute row sum.
    double lip = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < n; ++j) r += std::abs(q[i * n + j]);
        lip = std::max(lip, r);
    }
    std::vector<double> a(n, 0.0), prev = a, z = a;
    double t = 1.0;
    for (int it = 0; it < iterations; ++it) {
        std::vector<double> step(n);
        for (std::size_t i = 0; i < n; ++i) {
            double g = -1.0;
            for (std::size_t j = 0; j < n; ++j) g += q[i * n + j] * z[j];
            step[i] = z[i] - g / lip;
        }
        prev = a;
        a = project_box_hyperplane(step, y, c);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        for (std::size_t i = 0; i < n; ++i) z[i] = a[i] + (t - 1.0) / t_next * (a[i] - prev[i]);
        t = t_next;
        // Restart momentum when the objective goes up.
        if (dual_objective(q, a) > dual_objective(q, prev)) {
            t = 1.0;
            z = a;
        }
    }
    return {a, dual_objective(q, a)};
}

// Best entropy split by scanning every midpoint of every feature. Returns
// (feature, threshold, gain); feature -1 when nothing splits.
struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double entropy_bits(double n0, double n1) {
    const double n = n0 + n1;
    double h = 0.0;
    for (double k : {n0, n1}) {
        if (k > 0) h -= k / n * std::log2(k / n);
    }
    return h;
}

inline Split exhaustive_split(const std::vector<std::vector<double>>& rows, const std::vector<int>& y) {
    Split best;
    const std::size_t dim = rows.front().size();
    double n0 = 0, n1 = 0;
    for (int v : y) (v ? n1 : n0) += 1;
    const double parent = entropy_bits(n0, n1);
    const double n = n0 + n1;
    for (std::size_t f = 0; f < dim; ++f) {
        std::vector<double> values;
        for (const auto& r : rows) values.push_back(r[f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            const double thr = 0.5 * (values[k] + values[k + 1]);
            double l0 = 0, l1 = 0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i][f] <= thr) (y[i] ? l1 : l0) += 1;
            }
            const double r0 = n0 - l0, r1 = n1 - l1;
            const double gain = parent - (l0 + l1) / n * entropy_bits(l0, l1) - (r0 + r1) / n * entropy_bits(r0, r1);
            if (gain > best.gain + 1e-12) best = {static_cast<int>(f), thr, gain};
        }
    }
    return best;
}

// kNN attack score by sorting every reference row by exact distance.
inline double knn_score(const std::vector<std::vector<double>>& ref, const std::vector<int>& labels,
                        const std::vector<double>& q, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += (q[j] - ref[i][j]) * (q[j] - ref[i][j]);
        d.emplace_back(s, i);
    }
    std::size_t zeros = 0, zero_hits = 0;
    for (const auto& [s, i] : d) {
        if (s == 0.0) {
            ++zeros;
            zero_hits += labels[i];
        }
    }
    if (zeros > 0) return static_cast<double>(zero_hits) / static_cast<double>(zeros);
    std::sort(d.begin(), d.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        if (labels[a.second] != labels[b.second]) return labels[a.second] < labels[b.second];
        return ref[a.second] < ref[b.second];
    });
    double w = 0.0, hits = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double wi = 1.0 / std::sqrt(d[i].first);
        w += wi;
        hits += wi * labels[d[i].second];
    }
    return hits / w;
}

} // namespace oracle
