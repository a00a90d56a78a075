#include <doctest.h>

#include <cmath>
#include <random>

#include "mvf/gradcheck.hpp"
#include "mvf/loss.hpp"

using namespace mvf;

TEST_SUITE("loss") {

TEST_CASE("saturated prediction gives zero loss") {
  const std::vector<double> logits = {50.0, -50.0};
  FocalLossParams params;  // gamma 2
  CHECK(focal_loss(logits, 0, params) == doctest::Approx(0.0).epsilon(1e-15));

  FocalLossParams plain;
  plain.gamma = 0.0;
  CHECK(focal_loss(logits, 0, plain) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gamma=0, alpha=1 reduces to cross-entropy") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> d(-6.0, 6.0);
  FocalLossParams params;
  params.gamma = 0.0;
  params.alpha = {1.0, 1.0};
  for (int rep = 0; rep < 1000; ++rep) {
    const std::vector<double> logits = {d(rng), d(rng)};
    const int target = static_cast<int>(rng() % 2);
    const double z = logits[1 - target] - logits[target];
    const double ce = std::log1p(std::exp(z));  // -log softmax[target]
    CHECK(focal_loss(logits, target, params) == doctest::Approx(ce).epsilon(1e-10));
  }
}

TEST_CASE("hand-evaluated value at p_t=0.5, gamma=2, alpha=0.25") {
  // 0.25 * (0.5)^2 * (-log 0.5) = 0.0433217...
  const std::vector<double> logits = {0.0, 0.0};
  FocalLossParams params;
  params.gamma = 2.0;
  params.alpha = {0.25, 0.25};
  const double expected = 0.25 * 0.25 * std::log(2.0);
  CHECK(focal_loss(logits, 0, params) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.0433217).epsilon(1e-5));
}

TEST_CASE("gamma=0 gradient equals softmax minus one-hot") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> d(-4.0, 4.0);
  FocalLossParams params;
  params.gamma = 0.0;
  params.alpha = {1.0, 1.0};
  for (int rep = 0; rep < 200; ++rep) {
    const std::vector<double> logits = {d(rng), d(rng)};
    const int target = static_cast<int>(rng() % 2);
    const auto grad = focal_loss_gradient(logits, target, params);
    const double p1 = 1.0 / (1.0 + std::exp(logits[0] - logits[1]));
    const std::vector<double> want = {(1.0 - p1) - (target == 0 ? 1.0 : 0.0),
                                      p1 - (target == 1 ? 1.0 : 0.0)};
    CHECK(grad[0] == doctest::Approx(want[0]).epsilon(1e-10));
    CHECK(grad[1] == doctest::Approx(want[1]).epsilon(1e-10));
  }
}

TEST_CASE("gradient matches central finite differences at rel 1e-5") {
  const GradCheckReport report = gradcheck_loss(11);
  CHECK(report.passed);
  CHECK(report.worst() <= 1e-5);
}

TEST_CASE("gradient vanishes as p_t approaches 1") {
  FocalLossParams params;  // gamma 2
  for (const double margin : {10.0, 20.0, 40.0}) {
    const std::vector<double> logits = {margin, 0.0};
    const auto grad = focal_loss_gradient(logits, 0, params);
    CHECK(std::fabs(grad[0]) < 1e-7);
    CHECK(std::fabs(grad[1]) < 1e-7);
  }
  // exact saturation keeps the gradient finite and zero for gamma < 1 too
  FocalLossParams frac;
  frac.gamma = 0.5;
  const std::vector<double> saturated = {800.0, -800.0};
  const auto grad = focal_loss_gradient(saturated, 0, frac);
  CHECK(std::isfinite(grad[0]));
  CHECK(std::isfinite(grad[1]));
  CHECK(std::fabs(grad[0]) == 0.0);
}

TEST_CASE("loss is non-negative and p_t=0 never produces NaN") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> d(-30.0, 30.0);
  FocalLossParams params;
  params.gamma = 2.0;
  params.alpha = {0.3, 0.7};
  for (int rep = 0; rep < 500; ++rep) {
    const std::vector<double> logits = {d(rng), d(rng)};
    const double l = focal_loss(logits, static_cast<int>(rng() % 2), params);
    CHECK(std::isfinite(l));
    CHECK(l >= 0.0);
  }
  // numerically-zero p_t hits the clamp, not the log singularity
  const std::vector<double> extreme = {-800.0, 800.0};
  const double clamped = focal_loss(extreme, 0, params);
  CHECK(std::isfinite(clamped));
  CHECK(clamped > 0.0);
}

TEST_CASE("loss is non-increasing in gamma for fixed p_t < 1") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::vector<double> logits = {d(rng), d(rng)};
    const int target = static_cast<int>(rng() % 2);
    double prev = std::numeric_limits<double>::infinity();
    for (const double gamma : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      FocalLossParams params;
      params.gamma = gamma;
      const double l = focal_loss(logits, target, params);
      CHECK(l <= prev + 1e-15);
      prev = l;
    }
  }
}

TEST_CASE("batch reduction equals the mean of per-sample losses") {
  std::mt19937_64 rng(59);
  std::normal_distribution<double> d(0.0, 2.0);
  Tensor<double> logits(16, 2, 1, 1);
  std::vector<int> targets;
  for (auto& v : logits.data) v = d(rng);
  for (int i = 0; i < 16; ++i) targets.push_back(static_cast<int>(rng() % 2));
  FocalLossParams params;
  params.alpha = {0.4, 0.6};
  const auto [mean_loss, grad] = focal_loss_batch(logits, targets, params);

  double manual = 0.0;
  for (int i = 0; i < 16; ++i) {
    const std::vector<double> z = {logits.at(i, 0, 0, 0), logits.at(i, 1, 0, 0)};
    manual += focal_loss(z, targets[i], params);
  }
  manual /= 16.0;
  CHECK(mean_loss == doctest::Approx(manual).epsilon(1e-12));
  CHECK(grad.n == 16);
}

TEST_CASE("invalid parameters are rejected") {
  FocalLossParams params;
  params.gamma = -1.0;
  CHECK_THROWS_AS(params.validate(), ConfigError);
  params.gamma = 2.0;
  params.alpha = {0.0, 0.5};
  CHECK_THROWS_AS(params.validate(), ConfigError);
  const std::vector<double> logits = {0.0, 1.0};
  CHECK_THROWS_AS(focal_loss(logits, 5, FocalLossParams{}), UsageError);
  const std::vector<double> bad = {std::nan(""), 1.0};
  CHECK_THROWS_AS(focal_loss(bad, 0, FocalLossParams{}), UsageError);
}

}  // TEST_SUITE
