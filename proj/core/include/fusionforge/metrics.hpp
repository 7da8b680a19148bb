// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fusionforge {

/// K×K counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const noexcept { return k_; }
  std::uint64_t operator()(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * k_ + predicted];
  }
  void add(std::size_t truth, std::size_t predicted);

  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t support(std::size_t truth) const;
  std::uint64_t predicted_count(std::size_t predicted) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Throws ValidationError on length mismatch or out-of-range classes.
ConfusionMatrix confusion(std::span<const std::size_t> y_true,
                          std::span<const std::size_t> y_pred, std::size_t num_classes);

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricReport {
  double waf = 0.0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
};

/// Support-weighted average of per-class F1. A class whose precision and
/// recall are both zero scores F1 = 0. Throws ValidationError when the
/// matrix holds no samples.
double waf(const ConfusionMatrix& cm);

/// `class_names` may be empty, in which case classes are named by index.
MetricReport evaluate(const ConfusionMatrix& cm, std::span<const std::string> class_names = {});

/// JSON {waf, accuracy, per_class:[{name,precision,recall,f1,support}]}.
std::string to_json(const MetricReport& report);

}  // namespace fusionforge
