#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "mvf/errors.hpp"
#include "mvf/tensor.hpp"

namespace mvf {

/// Class-balancing factor per class and focusing parameter gamma.
struct FocalLossParams {
  double gamma = 2.0;
  std::vector<double> alpha = {1.0, 1.0};

  void validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
      throw ConfigError("focal.gamma must be finite and >= 0");
    if (alpha.empty()) throw ConfigError("focal.alpha must have one entry per class");
    for (double a : alpha)
      if (!(a > 0.0 && a <= 1.0))
        throw ConfigError("focal.alpha entries must lie in (0, 1]");
  }
};

namespace detail {

inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

constexpr double kProbFloor = 1e-12;  // p_t clamp; the loss is singular at 0

}  // namespace detail

/// -alpha_t * (1 - p_t)^gamma * log(p_t) with p_t = softmax(logits)[target].
inline double focal_loss(std::span<const double> logits, int target,
                         const FocalLossParams& params) {
  if (target < 0 || target >= static_cast<int>(logits.size()))
    throw UsageError("focal_loss: target out of range");
  for (double v : logits)
    if (!std::isfinite(v)) throw UsageError("focal_loss: non-finite logit");
  const std::vector<double> p = detail::softmax(logits);
  double pt = p[target];
  pt = std::min(1.0, std::max(detail::kProbFloor, pt));
  const double u = 1.0 - pt;
  const double mod = params.gamma == 0.0 ? 1.0 : std::pow(u, params.gamma);
  return -params.alpha[target] * mod * std::log(pt);
}

/// Analytic gradient of focal_loss with respect to the logits.
inline std::vector<double> focal_loss_gradient(std::span<const double> logits,
                                               int target,
                                               const FocalLossParams& params) {
  if (target < 0 || target >= static_cast<int>(logits.size()))
    throw UsageError("focal_loss_gradient: target out of range");
  const std::vector<double> p = detail::softmax(logits);
  double pt = p[target];
  pt = std::min(1.0, std::max(detail::kProbFloor, pt));
  const double u = 1.0 - pt;
  const double g = params.gamma;
  double coef;
  if (u > 0.0) {
    coef = std::pow(u, g) - g * pt * std::pow(u, g - 1.0) * std::log(pt);
  } else {
    coef = g == 0.0 ? 1.0 : 0.0;  // limit of both factors as p_t -> 1
  }
  const double a = params.alpha[target];
  std::vector<double> grad(logits.size());
  for (size_t j = 0; j < logits.size(); ++j) {
    const double indicator = static_cast<int>(j) == target ? 1.0 : 0.0;
    grad[j] = a * coef * (p[j] - indicator);
  }
  return grad;
}

/// Mean focal loss over a batch of (N, C, 1, 1) logits plus the gradient of
/// that mean with respect to every logit.
template <typename T>
std::pair<double, Tensor<T>> focal_loss_batch(const Tensor<T>& logits,
                                              const std::vector<int>& targets,
                                              const FocalLossParams& params) {
  if (static_cast<size_t>(logits.n) != targets.size())
    throw UsageError("focal_loss_batch: batch size mismatch");
  const int classes = logits.c;
  Tensor<T> dlogits(logits.n, classes, 1, 1);
  double total = 0.0;
  std::vector<double> z(classes);
  for (int ni = 0; ni < logits.n; ++ni) {
    for (int ci = 0; ci < classes; ++ci)
      z[ci] = static_cast<double>(logits.at(ni, ci, 0, 0));
    total += focal_loss(z, targets[ni], params);
    const std::vector<double> g = focal_loss_gradient(z, targets[ni], params);
    for (int ci = 0; ci < classes; ++ci)
      dlogits.at(ni, ci, 0, 0) = static_cast<T>(g[ci] / logits.n);
  }
  return {total / logits.n, std::move(dlogits)};
}

}  // namespace mvf
