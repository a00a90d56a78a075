#include "mvf/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "mvf/fusion.hpp"
#include "mvf/loss.hpp"
#include "mvf/model.hpp"

namespace mvf {

namespace {

// An element passes when the relative error meets the tolerance or the
// absolute difference is below the finite-difference noise floor.
struct Comparer {
  double tol, abs_floor;
  GradCheckReport::Group group;
  long skipped = 0;

  void compare(double analytic, double numeric) {
    ++group.checked;
    const double abs_diff = std::fabs(analytic - numeric);
    if (abs_diff <= abs_floor) return;
    const double rel = abs_diff / std::max(std::fabs(analytic), std::fabs(numeric));
    group.max_rel_error = std::max(group.max_rel_error, rel);
  }
};

double central_diff(double& slot, const std::function<double()>& loss_fn, double eps) {
  const double orig = slot;
  slot = orig + eps;
  const double lp = loss_fn();
  slot = orig - eps;
  const double lm = loss_fn();
  slot = orig;
  return (lp - lm) / (2.0 * eps);
}

void fd_check_tensor(Tensor<double>& value, const Tensor<double>& analytic_grad,
                     const std::function<double()>& loss_fn, double eps,
                     Comparer& cmp) {
  for (size_t i = 0; i < value.size(); ++i) {
    const double fd = central_diff(value.data[i], loss_fn, eps);
    const double fd_half = central_diff(value.data[i], loss_fn, eps / 2.0);
    // A ReLU or max-pool kink inside the probed interval makes the quotient
    // scale-dependent; such elements carry no usable derivative signal.
    const double drift = std::fabs(fd - fd_half);
    if (drift > std::max(cmp.abs_floor, 1e-3 * std::max(std::fabs(fd), std::fabs(fd_half)))) {
      ++cmp.skipped;
      continue;
    }
    cmp.compare(analytic_grad.data[i], fd_half);
  }
}

void finish_group(GradCheckReport& report, Comparer& cmp) {
  const long total = cmp.group.checked + cmp.skipped;
  const bool coverage_ok = cmp.skipped <= total / 20;  // at most 5% kink-skipped
  report.passed =
      report.passed && cmp.group.max_rel_error <= cmp.tol && coverage_ok;
  report.groups.push_back(cmp.group);
}

}  // namespace

GradCheckReport gradcheck_loss(uint64_t seed) {
  GradCheckReport report;
  report.tolerance = 1e-5;
  const double eps = 1e-6;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logit_dist(-4.0, 4.0);
  std::uniform_real_distribution<double> alpha_dist(0.05, 1.0);

  for (const double gamma : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    Comparer cmp{report.tolerance, 1e-9, {"gamma=" + std::to_string(gamma), 0.0, 0}};
    for (int rep = 0; rep < 40; ++rep) {
      const int classes = rep % 2 == 0 ? 2 : 3;
      std::vector<double> logits(classes);
      for (auto& z : logits) z = logit_dist(rng);
      FocalLossParams params;
      params.gamma = gamma;
      params.alpha.assign(classes, 0.0);
      for (auto& a : params.alpha) a = alpha_dist(rng);
      const int target = static_cast<int>(rng() % classes);
      const auto analytic = focal_loss_gradient(logits, target, params);
      for (int j = 0; j < classes; ++j) {
        const double orig = logits[j];
        logits[j] = orig + eps;
        const double lp = focal_loss(logits, target, params);
        logits[j] = orig - eps;
        const double lm = focal_loss(logits, target, params);
        logits[j] = orig;
        cmp.compare(analytic[j], (lp - lm) / (2.0 * eps));
      }
    }
    finish_group(report, cmp);
  }
  return report;
}

GradCheckReport gradcheck_fusion(uint64_t seed) {
  GradCheckReport report;
  report.tolerance = 1e-3;
  const double eps = 1e-4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);

  for (const auto kind : {AggregationKind::Average, AggregationKind::Concatenate}) {
    for (int mask = 0; mask < 4; ++mask) {
      const SkipFlags flags{(mask & 1) != 0, (mask & 2) != 0};
      FusionBlock<double> block(kind, flags, 3);
      block.init(rng);
      Tensor<double> a(2, 3, 4, 4), b(2, 3, 4, 4), sens(2, 3, 4, 4);
      for (auto& v : a.data) v = dist(rng);
      for (auto& v : b.data) v = dist(rng);
      for (auto& v : sens.data) v = dist(rng);

      const auto loss_fn = [&]() {
        const Tensor<double> out = block.forward(a, b, true);
        double s = 0.0;
        for (size_t i = 0; i < out.size(); ++i) s += out.data[i] * sens.data[i];
        return s;
      };

      block.proj.grad_weight.fill(0.0);
      block.proj.grad_bias.fill(0.0);
      block.bn.grad_scale.fill(0.0);
      block.bn.grad_shift.fill(0.0);
      block.forward(a, b, true);
      auto [da, db] = block.backward(sens);

      const std::string tag = to_string(kind) + "/skipE" +
                              std::to_string(flags.examined) + "A" +
                              std::to_string(flags.auxiliary);
      Comparer cmp{report.tolerance, 1e-6, {tag, 0.0, 0}};
      fd_check_tensor(block.proj.weight, block.proj.grad_weight, loss_fn, eps, cmp);
      fd_check_tensor(block.proj.bias, block.proj.grad_bias, loss_fn, eps, cmp);
      fd_check_tensor(block.bn.scale, block.bn.grad_scale, loss_fn, eps, cmp);
      fd_check_tensor(block.bn.shift, block.bn.grad_shift, loss_fn, eps, cmp);
      fd_check_tensor(a, da, loss_fn, eps, cmp);
      fd_check_tensor(b, db, loss_fn, eps, cmp);
      finish_group(report, cmp);
    }
  }
  return report;
}

GradCheckReport gradcheck_end_to_end_toy(uint64_t seed) {
  GradCheckReport report;
  report.tolerance = 1e-3;
  const double eps = 1e-4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);

  struct Case {
    FusionConfig cfg;
    std::string tag;
  };
  const std::vector<Case> cases = {
      {{FusionType::MF, AggregationKind::Concatenate, {true, true}, Depth::R18},
       "toy/MF_concat_skipEA"},
      {{FusionType::PreF, AggregationKind::Average, {false, false}, Depth::R18},
       "toy/PreF_avg"},
      {{FusionType::PostF, AggregationKind::Concatenate, {true, false}, Depth::R18},
       "toy/PostF_concat_skipE"},
  };

  for (const auto& c : cases) {
    const BackboneSpec spec = BackboneSpec::custom({1, 1, 1, 1}, {4, 6, 8, 10}, 4, 1);
    FusionModel<double> model(c.cfg, spec, seed);

    Tensor<double> exam(3, 1, 8, 8), aux(3, 1, 8, 8);
    for (auto& v : exam.data) v = dist(rng);
    for (auto& v : aux.data) v = dist(rng);
    const std::vector<int> targets = {0, 1, 1};
    FocalLossParams loss_params;
    loss_params.gamma = 2.0;
    loss_params.alpha = {0.4, 0.6};

    const auto loss_fn = [&]() {
      const Tensor<double> logits = model.forward(exam, aux, true);
      return focal_loss_batch(logits, targets, loss_params).first;
    };

    model.zero_grad();
    const Tensor<double> logits = model.forward(exam, aux, true);
    auto [loss, dlogits] = focal_loss_batch(logits, targets, loss_params);
    (void)loss;
    model.backward(dlogits);

    Comparer cmp{report.tolerance, 1e-6, {c.tag, 0.0, 0}};
    for (auto& p : model.parameters())
      fd_check_tensor(*p.value, *p.grad, loss_fn, eps, cmp);
    finish_group(report, cmp);
  }
  return report;
}

}  // namespace mvf
