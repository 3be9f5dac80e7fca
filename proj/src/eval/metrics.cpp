#include "firp/eval/metrics.hpp"

#include <cmath>

#include "firp/errors.hpp"

namespace firp::eval {

namespace {

struct Counts {
  int tp = 0, fn = 0, tn = 0, fp = 0;
};

Counts count(const std::vector<bool>& preds, const std::vector<bool>& labels) {
  if (preds.size() != labels.size()) throw DimensionError("predictions and labels differ in length");
  Counts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i]) {
      preds[i] ? ++c.tp : ++c.fn;
    } else {
      preds[i] ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

}  // namespace

double balanced_accuracy(const std::vector<bool>& preds, const std::vector<bool>& labels) {
  const Counts c = count(preds, labels);
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
    throw MetricError("balanced accuracy is undefined when labels hold a single class");
  }
  const double tpr = static_cast<double>(c.tp) / (c.tp + c.fn);
  const double tnr = static_cast<double>(c.tn) / (c.tn + c.fp);
  return (tpr + tnr) / 2;
}

std::vector<bool> threshold(const std::vector<double>& scores, double t) {
  std::vector<bool> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s >= t);
  return out;
}

double balanced_accuracy(const std::vector<double>& scores, const std::vector<bool>& labels, double t) {
  return balanced_accuracy(threshold(scores, t), labels);
}

double true_positive_rate(const std::vector<bool>& preds, const std::vector<bool>& labels) {
  const Counts c = count(preds, labels);
  if (c.tp + c.fn == 0) throw MetricError("true-positive rate needs at least one positive label");
  return static_cast<double>(c.tp) / (c.tp + c.fn);
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) throw MetricError("mean of an empty list");
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace firp::eval
