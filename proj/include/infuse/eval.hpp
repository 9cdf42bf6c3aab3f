#pragma once

#include "infuse/matrix.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace infuse {

// Attack is the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::uint64_t n() const { return tp + tn + fp + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred);

struct MetricsReport {
    ConfusionCounts counts;
    double accuracy = 0.0;
    double f_score = 0.0;
    double recall = 0.0;
    double specificity = 0.0;
    double fnr = 0.0;
    double precision = 0.0;
    double f_score_se = 0.0;  // 1.96 * sqrt(f (1 - f) / n)
    std::optional<double> auc_roc;
    std::optional<double> auc_pr;
    // Names of metrics whose denominator was zero (reported as 0).
    std::vector<std::string> degenerate;

    std::uint64_t n() const { return counts.n(); }
};

// 95% normal-approximation half-width for a proportion.
double binomial_se(double p, std::uint64_t n);

MetricsReport metrics(const ConfusionCounts& counts);
// Also fills both AUCs; `scores` are attack scores aligned with y_true.
MetricsReport metrics(const ConfusionCounts& counts, std::span<const int> y_true, std::span<const double> scores);

struct CurvePoint {
    double threshold;
    double x;
    double y;
};

struct Curve {
    std::vector<CurvePoint> points;
    double auc = 0.0;

    std::string to_csv() const;
};

// One point per distinct score (tied scores form one group), starting at (0, 0).
Curve roc_points(std::span<const int> y_true, std::span<const double> scores);
// x = recall, y = precision; starts at recall 0 with the precision of the
// highest-score group and ends at recall 1.
Curve pr_points(std::span<const int> y_true, std::span<const double> scores);

struct McnemarResult {
    std::uint64_t b = 0;  // a wrong, b right
    std::uint64_t c = 0;  // a right, b wrong
    double chi2 = 0.0;
    double p_value = 1.0;
    bool degenerate = false;
};

McnemarResult mcnemar(std::span<const int> y_true, std::span<const int> pred_a, std::span<const int> pred_b);
// Upper tail of the chi-square distribution with one degree of freedom.
double chi2_1_upper_tail(double chi2);

struct AttackRate {
    std::string attack;
    std::uint64_t total = 0;
    std::uint64_t detected = 0;
    double rate = 0.0;
    bool unseen = false;
};

// One row per attack family present in `attack_names` (normal excluded),
// sorted by name.
std::vector<AttackRate> per_attack_rates(std::span<const int> y_true, std::span<const int> y_pred,
                                         std::span<const std::string> attack_names,
                                         const std::set<std::string>& unseen);

std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& name, const MetricsReport& m);
std::string per_attack_csv(const std::vector<AttackRate>& rows);

} // namespace infuse
