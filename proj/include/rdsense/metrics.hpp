// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rdsense::learn {

/// Classification report: accuracy, per-class precision/recall/F1 (per-class
/// accuracy is the class recall), macro-F1 as the unweighted class-F1 mean,
/// and the confusion matrix (rows = truth, columns = prediction).
struct EvalReport {
    double accuracy_pct = 0.0;
    double macro_f1_pct = 0.0;
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<double> per_class_accuracy_pct;
    std::vector<double> per_class_f1_pct;
    std::vector<double> per_class_precision_pct;

    // filled by training-side callers
    std::size_t params = 0;
    double gflops = 0.0;
    std::vector<double> loss_curve;

    std::string to_json() const;
};

EvalReport evaluate(std::span<const int> predictions, std::span<const int> truths,
                    std::size_t num_classes);

}  // namespace rdsense::learn
