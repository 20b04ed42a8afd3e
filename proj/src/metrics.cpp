// SPDX-License-Identifier: Apache-2.0
#include "rdsense/metrics.hpp"

#include <stdexcept>

#include <json.hpp>

namespace rdsense::learn {

EvalReport evaluate(std::span<const int> predictions, std::span<const int> truths,
                    std::size_t num_classes) {
    if (predictions.size() != truths.size()) {
        throw std::invalid_argument("evaluate: prediction/truth count mismatch");
    }
    EvalReport rep;
    rep.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const int t = truths[i];
        const int p = predictions[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes ||
            static_cast<std::size_t>(p) >= num_classes) {
            throw std::invalid_argument("evaluate: label outside [0, num_classes)");
        }
        rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]++;
        if (t == p) ++correct;
    }
    const double total = static_cast<double>(truths.size());
    rep.accuracy_pct = total > 0.0 ? 100.0 * static_cast<double>(correct) / total : 0.0;

    double f1_sum = 0.0;
    rep.per_class_accuracy_pct.resize(num_classes);
    rep.per_class_f1_pct.resize(num_classes);
    rep.per_class_precision_pct.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::size_t tp = rep.confusion[c][c];
        std::size_t support = 0, predicted = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            support += rep.confusion[c][j];
            predicted += rep.confusion[j][c];
        }
        const double recall = support > 0 ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
        const double precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        rep.per_class_accuracy_pct[c] = 100.0 * recall;
        rep.per_class_precision_pct[c] = 100.0 * precision;
        rep.per_class_f1_pct[c] = 100.0 * f1;
        f1_sum += f1;
    }
    rep.macro_f1_pct = num_classes > 0 ? 100.0 * f1_sum / static_cast<double>(num_classes) : 0.0;
    return rep;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["accuracy_pct"] = accuracy_pct;
    j["macro_f1_pct"] = macro_f1_pct;
    j["confusion"] = confusion;
    j["per_class_accuracy_pct"] = per_class_accuracy_pct;
    j["per_class_f1_pct"] = per_class_f1_pct;
    j["per_class_precision_pct"] = per_class_precision_pct;
    j["params"] = params;
    j["gflops"] = gflops;
    if (!loss_curve.empty()) j["loss_curve"] = loss_curve;
    return j.dump(2);
}

}  // namespace rdsense::learn
