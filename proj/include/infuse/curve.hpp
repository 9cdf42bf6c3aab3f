#pragma once

#include "infuse/text.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace infuse {

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_metric = 0.0;  // validation loss (AE) or validation F-score (meta)
};

struct TrainingCurve {
    std::string metric_name = "val_loss";
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;

    std::string to_csv() const {
        std::ostringstream out;
        out << "epoch,train_loss," << metric_name << "\n";
        for (const auto& e : epochs) {
            out << e.epoch << "," << text::exact(e.train_loss) << "," << text::exact(e.val_metric) << "\n";
        }
        return out.str();
    }
};

} // namespace infuse
