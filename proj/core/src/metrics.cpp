// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/metrics.hpp"

#include <nlohmann/json.hpp>

#include "fusionforge/error.hpp"

namespace fusionforge {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw ValidationError("confusion: need at least one class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= k_ || predicted >= k_) {
    throw ValidationError("confusion: class index out of range (" + std::to_string(truth) + ", " +
                          std::to_string(predicted) + ") for K=" + std::to_string(k_));
  }
  ++counts_[truth * k_ + predicted];
  ++total_;
}

std::uint64_t ConfusionMatrix::support(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < k_; ++p) s += (*this)(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::predicted_count(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < k_; ++t) s += (*this)(t, predicted);
  return s;
}

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          std::size_t num_classes) {
  if (y_true.size() != y_pred.size()) {
    throw ValidationError("confusion: y_true has " + std::to_string(y_true.size()) +
                          " entries, y_pred has " + std::to_string(y_pred.size()));
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) cm.add(y_true[i], y_pred[i]);
  return cm;
}

MetricReport evaluate(const ConfusionMatrix& cm, std::span<const std::string> class_names) {
  if (cm.total() == 0) throw ValidationError("waf: undefined on an empty confusion matrix");
  if (!class_names.empty() && class_names.size() != cm.num_classes()) {
    throw ValidationError("evaluate: class name count does not match K");
  }
  MetricReport report;
  const double n = static_cast<double>(cm.total());
  std::uint64_t correct = 0;
  for (std::size_t k = 0; k < cm.num_classes(); ++k) {
    ClassMetrics c;
    c.name = class_names.empty() ? std::to_string(k) : class_names[k];
    const auto tp = static_cast<double>(cm(k, k));
    const auto predicted = static_cast<double>(cm.predicted_count(k));
    c.support = cm.support(k);
    c.precision = predicted > 0 ? tp / predicted : 0.0;
    c.recall = c.support > 0 ? tp / static_cast<double>(c.support) : 0.0;
    const double pr = c.precision + c.recall;
    c.f1 = pr > 0 ? 2.0 * c.precision * c.recall / pr : 0.0;
    report.waf += static_cast<double>(c.support) / n * c.f1;
    correct += cm(k, k);
    report.per_class.push_back(std::move(c));
  }
  report.accuracy = static_cast<double>(correct) / n;
  return report;
}

double waf(const ConfusionMatrix& cm) { return evaluate(cm).waf; }

std::string to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["waf"] = report.waf;
  j["accuracy"] = report.accuracy;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const ClassMetrics& c : report.per_class) {
    j["per_class"].push_back({{"name", c.name},
                              {"precision", c.precision},
                              {"recall", c.recall},
                              {"f1", c.f1},
                              {"support", c.support}});
  }
  return j.dump(2) + "\n";
}

}  // namespace fusionforge
