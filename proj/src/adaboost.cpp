#include "infuse/adaboost.hpp"

#include "infuse/error.hpp"
#include "infuse/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace infuse {

namespace {

constexpr double kMinError = 1e-10;

using SortedColumns = std::vector<std::vector<std::uint32_t>>;

SortedColumns sort_columns(const Matrix& x) {
    SortedColumns cols(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& order = cols[static_cast<std::size_t>(f)];
        order.resize(static_cast<std::size_t>(x.rows()));
        std::iota(order.begin(), order.end(), std::uint32_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }
    return cols;
}

Stump best_stump_sorted(const Matrix& x, const Labels& y, std::span<const double> weights, const SortedColumns& cols) {
    const auto n = static_cast<std::size_t>(x.rows());
    Stump best;
    bool found = false;
    double w_normal = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!y[i]) w_normal += weights[i];
    }
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        const auto& order = cols[static_cast<std::size_t>(f)];
        // Polarity +1 error with the threshold below every value: all predicted
        // attack, so every normal sample is wrong.
        double err = w_normal;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const auto i = order[k];
            err += y[i] ? weights[i] : -weights[i];
            const double v = x(static_cast<Eigen::Index>(i), f);
            const double next = x(static_cast<Eigen::Index>(order[k + 1]), f);
            if (v == next) continue;
            double thr = 0.5 * (v + next);
            if (thr >= next) thr = v;
            for (int pol : {1, -1}) {
                const double e = pol > 0 ? err : 1.0 - err;
                if (!found || e < best.error) {
                    best = {static_cast<std::size_t>(f), thr, pol, e, 0.0};
                    found = true;
                }
            }
        }
    }
    if (!found) best = {0, 0.0, 1, 0.5, 0.0};  // every feature constant
    return best;
}

} // namespace

Stump best_stump(const Matrix& x, const Labels& y, std::span<const double> weights) {
    if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() != weights.size()) {
        throw ShapeError("best_stump: size mismatch");
    }
    return best_stump_sorted(x, y, weights, sort_columns(x));
}

Vector AdaboostModel::margin(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != width) throw ShapeError("AdaBoost input width mismatch");
    Vector m = Vector::Zero(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const auto row = row_span(x, r);
        for (const auto& s : stages) m[r] += s.beta * s.predict(row);
    }
    return m;
}

Vector AdaboostModel::attack_probability(const Matrix& x) const {
    Vector m = margin(x);
    for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = 1.0 / (1.0 + std::exp(-m[i]));
    return m;
}

std::string AdaboostModel::serialize() const {
    ByteWriter w;
    w.u64(width);
    w.u64(stages.size());
    for (const auto& s : stages) {
        w.u64(s.feature);
        w.f64(s.threshold);
        w.i64(s.polarity);
        w.f64(s.error);
        w.f64(s.beta);
    }
    return encode_infb(ModelType::adaboost, w.bytes());
}

AdaboostModel AdaboostModel::deserialize(std::string_view bytes) {
    const auto payload = decode_infb(bytes, ModelType::adaboost);
    ByteReader r(payload);
    AdaboostModel m;
    m.width = r.u64();
    m.stages.resize(r.u64());
    for (auto& s : m.stages) {
        s.feature = r.u64();
        s.threshold = r.f64();
        s.polarity = static_cast<int>(r.i64());
        s.error = r.f64();
        s.beta = r.f64();
        if (s.feature >= m.width) throw SchemaError("stump feature out of range");
    }
    return m;
}

AdaboostModel train_adaboost(const Matrix& x, const Labels& y, const AdaboostParams& params, AdaboostTrace* trace) {
    if (params.estimators < 1) throw TrainingError("AdaBoost needs at least one estimator");
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0 || n != y.size()) throw TrainingError("AdaBoost needs labelled training rows");
    AdaboostModel model;
    model.width = static_cast<std::size_t>(x.cols());
    const auto cols = sort_columns(x);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    for (std::size_t round = 0; round < params.estimators; ++round) {
        if (trace) trace->weights.push_back(w);
        Stump s = best_stump_sorted(x, y, w, cols);
        if (s.error >= 0.5) break;
        const double e = std::max(s.error, kMinError);
        s.beta = 0.5 * std::log((1.0 - e) / e);
        model.stages.push_back(s);
        if (s.error <= kMinError) break;
        // w_i * exp(-beta y_i h_i), i.e. misclassified samples gain exp(2 beta)
        // relative to the rest.
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int yi = y[i] ? 1 : -1;
            w[i] *= std::exp(-s.beta * yi * s.predict(row_span(x, static_cast<Eigen::Index>(i))));
            total += w[i];
        }
        for (auto& v : w) v /= total;
    }
    return model;
}

} // namespace infuse
