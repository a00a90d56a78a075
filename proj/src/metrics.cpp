#include "mvf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mvf {

namespace {

void check_pair(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || labels.empty())
    throw UsageError("metrics: empty input");
  if (predictions.size() != labels.size())
    throw UsageError("metrics: predictions/labels length mismatch");
  for (size_t i = 0; i < labels.size(); ++i)
    if ((labels[i] != 0 && labels[i] != 1) || (predictions[i] != 0 && predictions[i] != 1))
      throw UsageError("metrics: classes must be 0 or 1");
}

}  // namespace

Confusion confusion(const std::vector<int>& predictions,
                    const std::vector<int>& labels) {
  check_pair(predictions, labels);
  Confusion m{{{0, 0}, {0, 0}}};
  for (size_t i = 0; i < labels.size(); ++i) ++m[labels[i]][predictions[i]];
  return m;
}

double macro_f1(const std::vector<int>& predictions,
                const std::vector<int>& labels) {
  const Confusion m = confusion(predictions, labels);
  double sum = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double tp = static_cast<double>(m[c][c]);
    const double fp = static_cast<double>(m[1 - c][c]);
    const double fn = static_cast<double>(m[c][1 - c]);
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 =
        precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    sum += f1;
  }
  return sum / 2.0;
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.empty() || scores.size() != labels.size())
    throw UsageError("auc_roc: bad input lengths");
  long pos = 0, neg = 0;
  for (int l : labels) {
    if (l == 1) ++pos;
    else if (l == 0) ++neg;
    else throw UsageError("auc_roc: classes must be 0 or 1");
  }
  if (pos == 0 || neg == 0)
    throw UsageError("auc_roc: undefined, only one class present");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Sum of (average ranks of positives) in half-units: for a tie group
  // spanning 1-based ranks [lo, hi], each member's doubled rank is lo + hi.
  long long pos_rank2 = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const long long rank2 = static_cast<long long>(i + 1) + static_cast<long long>(j);
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank2 += rank2;
    i = j;
  }
  // Doubled Mann-Whitney statistic and doubled pair count, both integers.
  const long long u2 = pos_rank2 - static_cast<long long>(pos) * (pos + 1);
  const long long d2 = 2LL * pos * neg;
  // Return the larger side by direct division; derive the smaller side by
  // exact subtraction from 1 so complementary inputs sum to exactly 1.
  if (2 * u2 >= d2)
    return static_cast<double>(u2) / static_cast<double>(d2);
  return 1.0 - static_cast<double>(d2 - u2) / static_cast<double>(d2);
}

MetricsReport build_report(const std::vector<int>& predictions,
                           const std::vector<double>& scores,
                           const std::vector<int>& labels) {
  MetricsReport r;
  r.confusion = confusion(predictions, labels);
  r.n_cases = static_cast<long>(labels.size());
  for (int c = 0; c < 2; ++c) {
    const double tp = static_cast<double>(r.confusion[c][c]);
    const double fp = static_cast<double>(r.confusion[1 - c][c]);
    const double fn = static_cast<double>(r.confusion[c][1 - c]);
    r.precision[c] = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall[c] = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    r.f1[c] = r.precision[c] + r.recall[c] > 0
                  ? 2.0 * r.precision[c] * r.recall[c] / (r.precision[c] + r.recall[c])
                  : 0.0;
  }
  r.macro_f1 = (r.f1[0] + r.f1[1]) / 2.0;
  const bool both = (r.confusion[0][0] + r.confusion[0][1]) > 0 &&
                    (r.confusion[1][0] + r.confusion[1][1]) > 0;
  if (both) r.auc_roc = auc_roc(scores, labels);
  return r;
}

}  // namespace mvf
