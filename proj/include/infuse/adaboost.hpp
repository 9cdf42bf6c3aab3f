#pragma once

#include "infuse/matrix.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace infuse {

// Depth-1 weak learner. polarity +1 predicts attack when x[feature] > threshold,
// polarity -1 predicts attack when x[feature] <= threshold.
struct Stump {
    std::size_t feature = 0;
    double threshold = 0.0;
    int polarity = 1;
    double error = 0.0;  // weighted training error when it was fitted
    double beta = 0.0;   // stage weight 0.5 ln((1 - error) / error)

    int predict(std::span<const double> row) const {
        const bool above = row[feature] > threshold;
        return (polarity > 0) == above ? 1 : -1;
    }
};

// Minimum weighted-error stump over every feature and midpoint threshold.
// Weights must sum to 1. Ties prefer lower feature, lower threshold, then
// polarity +1.
Stump best_stump(const Matrix& x, const Labels& y, std::span<const double> weights);

struct AdaboostParams {
    std::size_t estimators = 12;
};

struct AdaboostModel {
    std::vector<Stump> stages;
    std::size_t width = 0;

    // Sum of beta_t * h_t(x), h in {-1, +1}.
    Vector margin(const Matrix& x) const;
    // Logistic sigmoid of the margin.
    Vector attack_probability(const Matrix& x) const;

    std::string serialize() const;
    static AdaboostModel deserialize(std::string_view bytes);
};

// Per-round record of the boosting run, for inspection and tests.
struct AdaboostTrace {
    std::vector<std::vector<double>> weights;  // sample weights at the start of each round
};

AdaboostModel train_adaboost(const Matrix& x, const Labels& y, const AdaboostParams& params,
                             AdaboostTrace* trace = nullptr);

} // namespace infuse
