#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mvf/errors.hpp"

namespace mvf {

using Confusion = std::array<std::array<long, 2>, 2>;  // [actual][predicted]

struct MetricsReport {
  double macro_f1 = 0.0;
  std::optional<double> auc_roc;  // absent when only one class is present
  std::array<double, 2> precision{0.0, 0.0};
  std::array<double, 2> recall{0.0, 0.0};
  std::array<double, 2> f1{0.0, 0.0};
  Confusion confusion{{{0, 0}, {0, 0}}};
  long n_cases = 0;
};

Confusion confusion(const std::vector<int>& predictions,
                    const std::vector<int>& labels);

/// Unweighted mean of per-class F1. 0/0 precision or recall counts as 0.
double macro_f1(const std::vector<int>& predictions,
                const std::vector<int>& labels);

/// Mann-Whitney rank statistic: the fraction of (positive, negative) pairs
/// where the positive outscores the negative, ties counted one half. Throws
/// UsageError when only one class is present.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

MetricsReport build_report(const std::vector<int>& predictions,
                           const std::vector<double>& scores,
                           const std::vector<int>& labels);

}  // namespace mvf
