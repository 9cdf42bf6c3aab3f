#include "infuse/eval.hpp"

#include "infuse/error.hpp"
#include "infuse/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace infuse {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw ShapeError(std::string(what) + ": lengths differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

int check_label(int v) {
    if (v != 0 && v != 1) throw DomainError("labels must be 0 or 1, got " + std::to_string(v));
    return v;
}

// Cumulative (tp, fp) after each group of tied scores, highest score first.
struct Group {
    double threshold;
    std::uint64_t tp;
    std::uint64_t fp;
};

std::vector<Group> ranked_groups(std::span<const int> y, std::span<const double> s, std::uint64_t& pos, std::uint64_t& neg) {
    check_lengths(y.size(), s.size(), "curve");
    pos = 0;
    neg = 0;
    for (auto v : y) (check_label(v) == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw DomainError("curve needs at least one positive and one negative sample");
    for (auto v : s) {
        if (std::isnan(v)) throw DomainError("curve scores contain NaN");
    }
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::vector<Group> groups;
    std::uint64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = s[order[i]];
        for (; i < order.size() && s[order[i]] == t; ++i) (y[order[i]] == 1 ? tp : fp)++;
        groups.push_back({t, tp, fp});
    }
    return groups;
}

double ratio(std::uint64_t num, std::uint64_t den, const char* name, std::vector<std::string>& degenerate) {
    if (den == 0) {
        degenerate.emplace_back(name);
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double trapezoid(const std::vector<CurvePoint>& pts) {
    double a = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) a += (pts[i].x - pts[i - 1].x) * (pts[i].y + pts[i - 1].y) / 2.0;
    return a;
}

} // namespace

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred) {
    check_lengths(y_true.size(), y_pred.size(), "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = check_label(y_true[i]) == 1;
        const bool p = check_label(y_pred[i]) == 1;
        if (t && p) ++c.tp;
        else if (t) ++c.fn;
        else if (p) ++c.fp;
        else ++c.tn;
    }
    return c;
}

double binomial_se(double p, std::uint64_t n) {
    if (n == 0) throw DomainError("standard error needs n > 0");
    return 1.96 * std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

MetricsReport metrics(const ConfusionCounts& c) {
    const auto n = c.n();
    if (n == 0) throw DomainError("metrics need at least one sample");
    MetricsReport m;
    m.counts = c;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
    m.recall = ratio(c.tp, c.tp + c.fn, "recall", m.degenerate);
    m.fnr = ratio(c.fn, c.tp + c.fn, "fnr", m.degenerate);
    m.specificity = ratio(c.tn, c.tn + c.fp, "specificity", m.degenerate);
    m.precision = ratio(c.tp, c.tp + c.fp, "precision", m.degenerate);
    // Harmonic mean of precision and recall, in count form so the 0/0 case is
    // exactly the all-negative one.
    m.f_score = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "f_score", m.degenerate);
    m.f_score_se = binomial_se(m.f_score, n);
    return m;
}

MetricsReport metrics(const ConfusionCounts& counts, std::span<const int> y_true, std::span<const double> scores) {
    MetricsReport m = metrics(counts);
    m.auc_roc = roc_points(y_true, scores).auc;
    m.auc_pr = pr_points(y_true, scores).auc;
    return m;
}

std::string Curve::to_csv() const {
    std::ostringstream out;
    out << "threshold,x,y\n";
    for (const auto& p : points) out << text::exact(p.threshold) << "," << text::exact(p.x) << "," << text::exact(p.y) << "\n";
    return out.str();
}

Curve roc_points(std::span<const int> y_true, std::span<const double> scores) {
    std::uint64_t pos = 0, neg = 0;
    const auto groups = ranked_groups(y_true, scores, pos, neg);
    Curve c;
    c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    for (const auto& g : groups) {
        c.points.push_back({g.threshold, static_cast<double>(g.fp) / static_cast<double>(neg),
                            static_cast<double>(g.tp) / static_cast<double>(pos)});
    }
    c.auc = trapezoid(c.points);
    return c;
}

Curve pr_points(std::span<const int> y_true, std::span<const double> scores) {
    std::uint64_t pos = 0, neg = 0;
    const auto groups = ranked_groups(y_true, scores, pos, neg);
    Curve c;
    auto precision = [](const Group& g) {
        return g.tp + g.fp == 0 ? 1.0 : static_cast<double>(g.tp) / static_cast<double>(g.tp + g.fp);
    };
    c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, precision(groups.front())});
    for (const auto& g : groups) {
        c.points.push_back({g.threshold, static_cast<double>(g.tp) / static_cast<double>(pos), precision(g)});
    }
    c.auc = trapezoid(c.points);
    return c;
}

double chi2_1_upper_tail(double chi2) {
    if (chi2 <= 0) return 1.0;
    return std::erfc(std::sqrt(chi2 / 2.0));
}

McnemarResult mcnemar(std::span<const int> y_true, std::span<const int> pred_a, std::span<const int> pred_b) {
    check_lengths(y_true.size(), pred_a.size(), "mcnemar");
    check_lengths(y_true.size(), pred_b.size(), "mcnemar");
    McnemarResult r;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool a_ok = check_label(pred_a[i]) == check_label(y_true[i]);
        const bool b_ok = check_label(pred_b[i]) == y_true[i];
        if (!a_ok && b_ok) ++r.b;
        if (a_ok && !b_ok) ++r.c;
    }
    if (r.b + r.c == 0) {
        r.degenerate = true;
        return r;
    }
    const double d = static_cast<double>(r.b) - static_cast<double>(r.c);
    r.chi2 = d * d / static_cast<double>(r.b + r.c);
    r.p_value = chi2_1_upper_tail(r.chi2);
    return r;
}

std::vector<AttackRate> per_attack_rates(std::span<const int> y_true, std::span<const int> y_pred,
                                         std::span<const std::string> attack_names,
                                         const std::set<std::string>& unseen) {
    check_lengths(y_true.size(), y_pred.size(), "per-attack rates");
    check_lengths(y_true.size(), attack_names.size(), "per-attack rates");
    std::map<std::string, AttackRate> by_name;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (check_label(y_true[i]) == 0) continue;
        auto& row = by_name[attack_names[i]];
        row.attack = attack_names[i];
        ++row.total;
        if (check_label(y_pred[i]) == 1) ++row.detected;
    }
    std::vector<AttackRate> out;
    for (auto& [name, row] : by_name) {
        row.rate = static_cast<double>(row.detected) / static_cast<double>(row.total);
        row.unseen = unseen.contains(name);
        out.push_back(row);
    }
    return out;
}

std::string metrics_csv_header() {
    return "name,n,tp,tn,fp,fn,accuracy,f_score,f_score_se,recall,specificity,fnr,precision,auc_roc,auc_pr\n";
}

std::string metrics_csv_row(const std::string& name, const MetricsReport& m) {
    std::ostringstream out;
    const auto& c = m.counts;
    out << name << "," << m.n() << "," << c.tp << "," << c.tn << "," << c.fp << "," << c.fn;
    for (double v : {m.accuracy, m.f_score, m.f_score_se, m.recall, m.specificity, m.fnr, m.precision}) {
        out << "," << text::fixed(v, 6);
    }
    out << "," << (m.auc_roc ? text::fixed(*m.auc_roc, 6) : "") << "," << (m.auc_pr ? text::fixed(*m.auc_pr, 6) : "");
    out << "\n";
    return out.str();
}

std::string per_attack_csv(const std::vector<AttackRate>& rows) {
    std::ostringstream out;
    out << "attack,total,detected,rate,unseen\n";
    for (const auto& r : rows) {
        out << r.attack << "," << r.total << "," << r.detected << "," << text::fixed(r.rate, 6) << "," << (r.unseen ? 1 : 0)
            << "\n";
    }
    return out.str();
}

} // namespace infuse
