#include "infuse/shift.hpp"

#include "infuse/error.hpp"
#include "infuse/parallel.hpp"
#include "infuse/rng.hpp"
#include "infuse/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace infuse {

double ecdf(std::span<const double> sorted, double x) {
    if (sorted.empty()) throw DomainError("ecdf of an empty sample");
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

double kolmogorov_tail(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    constexpr double kPi = 3.14159265358979323846;
    if (lambda < 1.18) {
        // The alternating tail series converges slowly here; use the theta
        // form of the CDF instead.
        const double c = kPi * kPi / (8.0 * lambda * lambda);
        double cdf = 0.0;
        for (int k = 1; k < 100; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(-odd * odd * c);
            cdf += term;
            if (term < 1e-17) break;
        }
        return std::clamp(1.0 - std::sqrt(2.0 * kPi) / lambda * cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
        const double kk = static_cast<double>(k);
        const double term = std::exp(-2.0 * kk * kk * lambda * lambda);
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DomainError("ks_two_sample needs two non-empty samples");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double n = static_cast<double>(sa.size());
    const double m = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    // Between consecutive pooled points both ECDFs are flat, so the supremum is
    // attained at a right limit of some pooled point.
    while (i < sa.size() || j < sb.size()) {
        double v;
        if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) v = sa[i];
        else v = sb[j];
        while (i < sa.size() && sa[i] <= v) ++i;
        while (j < sb.size() && sb[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    KsResult r;
    r.d = d;
    r.n = sa.size();
    r.m = sb.size();
    r.p_value = kolmogorov_tail(d * std::sqrt(n * m / (n + m)));
    return r;
}

Projection fit_projection(const Matrix& fit_on, std::size_t k, std::uint64_t seed) {
    if (fit_on.rows() < 2) throw DomainError("projection needs at least 2 samples");
    if (fit_on.cols() < static_cast<Eigen::Index>(std::max<std::size_t>(k, 2))) {
        throw DomainError("projection needs at least as many columns as components (and at least 2)");
    }
    const Eigen::Index dim = fit_on.cols();
    Projection p;
    p.mean = fit_on.colwise().mean().transpose();
    const Matrix centered = fit_on.rowwise() - p.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(fit_on.rows() - 1);
    const double scale = std::max(cov.trace(), 1e-300);

    p.components.resize(static_cast<Eigen::Index>(k), dim);
    p.variances.resize(static_cast<Eigen::Index>(k));
    Rng rng(seed);
    auto orthogonalize = [&](Vector& v, Eigen::Index upto) {
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index c = 0; c < upto; ++c) {
                const Vector u = p.components.row(c).transpose();
                v -= u.dot(v) * u;
            }
        }
    };
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) {
        Vector v(dim);
        for (Eigen::Index t = 0; t < dim; ++t) v[t] = rng.normal();
        orthogonalize(v, c);
        v.normalize();
        for (int iter = 0; iter < 20000; ++iter) {
            Vector w = cov * v;
            orthogonalize(w, c);
            const double norm = w.norm();
            if (norm <= 1e-14 * scale) break;  // remaining spectrum is numerically zero
            w /= norm;
            const double change = (w - v).norm();
            v = std::move(w);
            if (change < 1e-13) break;
        }
        orthogonalize(v, c);
        v.normalize();
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        p.components.row(c) = v.transpose();
        p.variances[c] = v.dot(cov * v);
    }
    return p;
}

Matrix apply_projection(const Projection& p, const Matrix& x) {
    if (x.cols() != p.mean.size()) throw ShapeError("projection width mismatch");
    return (x.rowwise() - p.mean.transpose()) * p.components.transpose();
}

Matrix project_2d(const Matrix& matrix, const Matrix& fit_on, std::uint64_t seed) {
    return apply_projection(fit_projection(fit_on, 2, seed), matrix);
}

std::string ShiftReport::to_csv() const {
    std::ostringstream out;
    out << "feature,D,p\n";
    for (const auto& f : features) out << f.feature << "," << text::exact(f.ks.d) << "," << text::exact(f.ks.p_value) << "\n";
    out << "pc1_summary," << text::exact(summary.d) << "," << text::exact(summary.p_value) << "\n";
    return out.str();
}

std::string ShiftReport::to_json() const {
    nlohmann::ordered_json j;
    j["summary"] = {{"method", "first_principal_component"},
                    {"D", summary.d},
                    {"p_value", summary.p_value},
                    {"n", summary.n},
                    {"m", summary.m}};
    std::size_t significant = 0;
    double max_d = 0.0;
    std::string max_feature;
    for (const auto& f : features) {
        if (f.ks.p_value < 0.05) ++significant;
        if (f.ks.d > max_d) {
            max_d = f.ks.d;
            max_feature = f.feature;
        }
    }
    j["features_tested"] = features.size();
    j["features_shifted_p05"] = significant;
    j["max_feature"] = {{"feature", max_feature}, {"D", max_d}};
    return j.dump(2) + "\n";
}

ShiftReport shift_report(const Matrix& train, const Matrix& test, std::span<const std::size_t> columns,
                         std::span<const std::string> names, std::uint64_t seed) {
    if (train.cols() != test.cols()) throw ShapeError("shift_report: train and test column counts differ");
    std::vector<std::size_t> cols(columns.begin(), columns.end());
    if (cols.empty()) {
        for (Eigen::Index c = 0; c < train.cols(); ++c) cols.push_back(static_cast<std::size_t>(c));
    }
    if (!names.empty() && names.size() != cols.size()) throw ShapeError("shift_report: one name per column");
    ShiftReport report;
    report.features.resize(cols.size());
    parallel_chunks(cols.size(), 4, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const auto c = static_cast<Eigen::Index>(cols[k]);
            const Vector a = train.col(c);
            const Vector b = test.col(c);
            auto& f = report.features[k];
            f.feature = names.empty() ? "c" + std::to_string(cols[k]) : names[k];
            f.ks = ks_two_sample({a.data(), static_cast<std::size_t>(a.size())},
                                 {b.data(), static_cast<std::size_t>(b.size())});
        }
    });
    const auto proj = fit_projection(train, 2, seed);
    const Vector pa = apply_projection(proj, train).col(0);
    const Vector pb = apply_projection(proj, test).col(0);
    report.summary = ks_two_sample({pa.data(), static_cast<std::size_t>(pa.size())},
                                   {pb.data(), static_cast<std::size_t>(pb.size())});
    return report;
}

} // namespace infuse
