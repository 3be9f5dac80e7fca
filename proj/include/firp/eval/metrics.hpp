#pragma once

#include <utility>
#include <vector>

namespace firp::eval {

/// (TPR + TNR) / 2. Throws MetricError unless both classes occur in `labels`.
double balanced_accuracy(const std::vector<bool>& preds, const std::vector<bool>& labels);
/// Thresholds scores at `threshold` (p >= threshold is a predicted success).
std::vector<bool> threshold(const std::vector<double>& scores, double threshold = 0.5);
double balanced_accuracy(const std::vector<double>& scores, const std::vector<bool>& labels, double t = 0.5);

/// True-positive rate; throws MetricError without positives.
double true_positive_rate(const std::vector<bool>& preds, const std::vector<bool>& labels);

/// Mean and sample standard deviation (0 for a single value). Throws
/// MetricError on an empty list.
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace firp::eval
