#include "infuse/svm.hpp"

#include "infuse/error.hpp"
#include "infuse/parallel.hpp"
#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

namespace infuse {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// LRU cache of Q columns, Q_ij = y_i y_j exp(-gamma |x_i - x_j|^2).
class QColumnCache {
public:
    QColumnCache(const Matrix& x, std::span<const int> y, double gamma, std::size_t cache_mb)
        : x_(x), y_(y), gamma_(gamma), n_(static_cast<std::size_t>(x.rows())) {
        norms_ = x.rowwise().squaredNorm();
        const std::size_t bytes = cache_mb * 1024 * 1024;
        capacity_ = std::max<std::size_t>(2, bytes / std::max<std::size_t>(1, n_ * sizeof(double)));
    }

    const std::vector<double>& column(std::size_t i) {
        if (auto it = index_.find(i); it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->values;
        }
        if (lru_.size() >= capacity_) {
            index_.erase(lru_.back().index);
            lru_.pop_back();
        }
        Entry e{i, std::vector<double>(n_)};
        const Vector dots = x_ * x_.row(static_cast<Eigen::Index>(i)).transpose();
        const double ni = norms_[static_cast<Eigen::Index>(i)];
        for (std::size_t t = 0; t < n_; ++t) {
            const double d2 = std::max(0.0, ni + norms_[static_cast<Eigen::Index>(t)] - 2.0 * dots[static_cast<Eigen::Index>(t)]);
            e.values[t] = static_cast<double>(y_[i] * y_[t]) * std::exp(-gamma_ * d2);
        }
        e.values[i] = 1.0;
        lru_.push_front(std::move(e));
        index_[i] = lru_.begin();
        return lru_.front().values;
    }

private:
    struct Entry {
        std::size_t index;
        std::vector<double> values;
    };

    const Matrix& x_;
    std::span<const int> y_;
    double gamma_;
    std::size_t n_;
    Vector norms_;
    std::size_t capacity_;
    std::list<Entry> lru_;
    std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

} // namespace

SmoResult solve_smo(const Matrix& x, std::span<const int> y, double c, double gamma, double eps,
                    std::size_t cache_mb, std::size_t max_iter) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    if (n != y.size()) throw ShapeError("solve_smo: label count mismatch");
    if (n < 2) throw TrainingError("SVM needs at least two samples");
    for (int v : y) {
        if (v != 1 && v != -1) throw DomainError("solve_smo labels must be -1 or +1");
    }

    QColumnCache cache(x, y, gamma, cache_mb);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // Q alpha - e
    auto upper = [&](std::size_t t) { return alpha[t] >= c; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    SmoResult res;
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        // First index: maximal violation of -y_t G_t over the "up" set.
        double gmax = -kInf;
        std::ptrdiff_t gi = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (!upper(t) && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    gi = static_cast<std::ptrdiff_t>(t);
                }
            } else if (!lower(t) && grad[t] >= gmax) {
                gmax = grad[t];
                gi = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (gi < 0) {
            res.converged = true;
            break;
        }
        const auto i = static_cast<std::size_t>(gi);
        const auto& qi = cache.column(i);

        // Second index: largest guaranteed objective decrease.
        double gmax2 = -kInf;
        double best = kInf;
        std::ptrdiff_t gj = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (lower(t)) continue;
                const double diff = gmax + grad[t];
                gmax2 = std::max(gmax2, grad[t]);
                if (diff > 0) {
                    double quad = 2.0 - 2.0 * y[i] * qi[t];
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        gj = static_cast<std::ptrdiff_t>(t);
                    }
                }
            } else {
                if (upper(t)) continue;
                const double diff = gmax - grad[t];
                gmax2 = std::max(gmax2, -grad[t]);
                if (diff > 0) {
                    double quad = 2.0 + 2.0 * y[i] * qi[t];
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        gj = static_cast<std::ptrdiff_t>(t);
                    }
                }
            }
        }
        if (gmax + gmax2 < eps || gj < 0) {
            res.converged = true;
            break;
        }
        const auto j = static_cast<std::size_t>(gj);
        const auto& qj = cache.column(j);
        // Touching column j may evict column i; refetch keeps the reference valid.
        const auto& qi2 = cache.column(i);

        const double old_i = alpha[i];
        const double old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = 2.0 + 2.0 * qi2[j];
            if (quad <= 0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = 2.0 - 2.0 * qi2[j];
            if (quad <= 0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += qi2[t] * di + qj[t] * dj;
    }
    res.iterations = iter;

    // Offset from free vectors; midpoint of the feasible interval otherwise.
    double ub = kInf;
    double lb = -kInf;
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (upper(t)) {
            if (y[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    res.b = -rho;

    double obj = 0.0;
    for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
    res.objective = obj / 2.0;
    res.alpha = std::move(alpha);
    return res;
}

double PlattParams::probability(double f) const {
    const double z = a * f + b;
    if (z >= 0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

PlattParams fit_platt(std::span<const double> dec, std::span<const int> positive) {
    if (dec.size() != positive.size()) throw ShapeError("fit_platt: size mismatch");
    double prior1 = 0;
    double prior0 = 0;
    for (int p : positive) (p ? prior1 : prior0) += 1;
    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(dec.size());
    for (std::size_t i = 0; i < dec.size(); ++i) t[i] = positive[i] ? hi : lo;

    const double min_step = 1e-10;
    const double sigma = 1e-12;
    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    auto objective = [&](double aa, double bb) {
        double f = 0.0;
        for (std::size_t i = 0; i < dec.size(); ++i) {
            const double z = dec[i] * aa + bb;
            if (z >= 0) f += t[i] * z + std::log1p(std::exp(-z));
            else f += (t[i] - 1.0) * z + std::log1p(std::exp(z));
        }
        return f;
    };
    double fval = objective(a, b);
    for (int it = 0; it < 100; ++it) {
        double h11 = sigma;
        double h22 = sigma;
        double h21 = 0.0;
        double g1 = 0.0;
        double g2 = 0.0;
        for (std::size_t i = 0; i < dec.size(); ++i) {
            const double z = dec[i] * a + b;
            double p;
            double q;
            if (z >= 0) {
                const double e = std::exp(-z);
                p = e / (1.0 + e);
                q = 1.0 / (1.0 + e);
            } else {
                const double e = std::exp(z);
                p = 1.0 / (1.0 + e);
                q = e / (1.0 + e);
            }
            const double d2 = p * q;
            h11 += dec[i] * dec[i] * d2;
            h22 += d2;
            h21 += dec[i] * d2;
            const double d1 = t[i] - p;
            g1 += dec[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        while (step >= min_step) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nf = objective(na, nb);
            if (nf < fval + 0.0001 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if (step < min_step) break;
    }
    return {a, b};
}

Vector SvmModel::decision(const Matrix& x) const {
    if (x.cols() != support.cols()) throw ShapeError("SVM input width mismatch");
    Vector out(x.rows());
    const Vector sv_norms = support.rowwise().squaredNorm();
    const Eigen::Map<const Vector> w(coef.data(), static_cast<Eigen::Index>(coef.size()));
    parallel_chunks(static_cast<std::size_t>(x.rows()), 256, [&](std::size_t lo, std::size_t hi) {
        const auto rows = static_cast<Eigen::Index>(hi - lo);
        const auto block = x.middleRows(static_cast<Eigen::Index>(lo), rows);
        const Vector q_norms = block.rowwise().squaredNorm();
        Matrix k = block * support.transpose();
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index s = 0; s < k.cols(); ++s) {
                const double d2 = std::max(0.0, q_norms[r] + sv_norms[s] - 2.0 * k(r, s));
                k(r, s) = std::exp(-gamma * d2);
            }
        }
        out.segment(static_cast<Eigen::Index>(lo), rows) = k * w + Vector::Constant(rows, b);
    });
    return out;
}

Vector SvmModel::attack_probability(const Matrix& x) const {
    Vector f = decision(x);
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = platt.probability(f[i]);
    return f;
}

std::string SvmModel::serialize() const {
    ByteWriter w;
    w.f64(gamma);
    w.f64(c);
    w.f64(b);
    w.f64(platt.a);
    w.f64(platt.b);
    w.matrix(support);
    w.f64s(coef);
    return encode_infb(ModelType::svm, w.bytes());
}

SvmModel SvmModel::deserialize(std::string_view bytes) {
    const auto payload = decode_infb(bytes, ModelType::svm);
    ByteReader r(payload);
    SvmModel m;
    m.gamma = r.f64();
    m.c = r.f64();
    m.b = r.f64();
    m.platt.a = r.f64();
    m.platt.b = r.f64();
    m.support = r.matrix();
    m.coef = r.f64s();
    if (static_cast<Eigen::Index>(m.coef.size()) != m.support.rows()) throw SchemaError("SVM payload inconsistent");
    return m;
}

std::vector<std::size_t> stratified_subsample(const Labels& y, std::size_t cap, std::uint64_t seed) {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
    if (y.size() <= cap) {
        std::vector<std::size_t> all(y.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(pos));
    rng.shuffle(std::span<std::size_t>(neg));
    auto n_pos = static_cast<std::size_t>(std::floor(static_cast<double>(cap) * static_cast<double>(pos.size()) /
                                                         static_cast<double>(y.size()) + 0.5));
    n_pos = std::min(n_pos, pos.size());
    const std::size_t n_neg = std::min(cap - n_pos, neg.size());
    std::vector<std::size_t> out(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
    out.insert(out.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
    std::sort(out.begin(), out.end());
    return out;
}

SvmModel train_svm(const Matrix& x, const Labels& y, const SvmParams& params, std::uint64_t seed) {
    if (params.cap < 2) throw TrainingError("SVM training cap must be at least 2");
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("train_svm: label count mismatch");
    const auto n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (n_pos == 0 || n_pos == y.size()) throw TrainingError("SVM training data has a single class");

    const auto rows = stratified_subsample(y, params.cap, derive_seed(seed, 0));
    Labels ys = select(y, rows);

    // Hold out a stratified fold for the sigmoid when both classes can spare it.
    std::vector<std::size_t> fit_idx;
    std::vector<std::size_t> cal_idx;
    const auto sub_pos = static_cast<std::size_t>(std::count(ys.begin(), ys.end(), 1));
    const bool holdout = params.platt_holdout > 0.0 && sub_pos >= 5 && ys.size() - sub_pos >= 5;
    if (holdout) {
        std::vector<std::size_t> pos;
        std::vector<std::size_t> neg;
        for (std::size_t i = 0; i < ys.size(); ++i) (ys[i] ? pos : neg).push_back(i);
        Rng rng(derive_seed(seed, 1));
        for (auto* group : {&pos, &neg}) {
            rng.shuffle(std::span<std::size_t>(*group));
            const auto n_cal = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(params.platt_holdout * static_cast<double>(group->size()) + 0.5)));
            cal_idx.insert(cal_idx.end(), group->begin(), group->begin() + static_cast<std::ptrdiff_t>(n_cal));
            fit_idx.insert(fit_idx.end(), group->begin() + static_cast<std::ptrdiff_t>(n_cal), group->end());
        }
        std::sort(fit_idx.begin(), fit_idx.end());
        std::sort(cal_idx.begin(), cal_idx.end());
    } else {
        fit_idx.resize(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) fit_idx[i] = i;
    }

    std::vector<std::size_t> fit_rows;
    fit_rows.reserve(fit_idx.size());
    for (auto i : fit_idx) fit_rows.push_back(rows[i]);
    const Matrix xf = select_rows(x, fit_rows);
    std::vector<int> yf;
    yf.reserve(fit_rows.size());
    for (auto r : fit_rows) yf.push_back(y[r] ? 1 : -1);

    const auto smo = solve_smo(xf, yf, params.c, params.gamma, params.eps, params.cache_mb, params.max_iter);

    SvmModel model;
    model.gamma = params.gamma;
    model.c = params.c;
    model.b = smo.b;
    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < smo.alpha.size(); ++i) {
        if (smo.alpha[i] > 0.0) {
            sv.push_back(i);
            model.coef.push_back(smo.alpha[i] * yf[i]);
        }
    }
    model.support = select_rows(xf, sv);

    std::vector<std::size_t> cal_rows;
    if (holdout) {
        for (auto i : cal_idx) cal_rows.push_back(rows[i]);
    } else {
        cal_rows = fit_rows;
    }
    const Vector dec = model.decision(select_rows(x, cal_rows));
    std::vector<int> pos_flags;
    pos_flags.reserve(cal_rows.size());
    for (auto r : cal_rows) pos_flags.push_back(y[r]);
    model.platt = fit_platt({dec.data(), static_cast<std::size_t>(dec.size())}, pos_flags);
    return model;
}

} // namespace infuse
