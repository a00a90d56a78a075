#include <doctest.h>

#include <random>

#include "mvf/fusion.hpp"
#include "mvf/gradcheck.hpp"
#include "mvf/model.hpp"

using namespace mvf;

namespace {

Tensor<double> tensor_1x1(std::initializer_list<double> row) {
  Tensor<double> t(1, 1, 1, static_cast<int>(row.size()));
  std::copy(row.begin(), row.end(), t.data.begin());
  return t;
}

void randomize(Tensor<double>& t, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  for (auto& v : t.data) v = d(rng);
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("aggregate: pixel-wise mean") {
  const Tensor<double> a = tensor_1x1({2, 4});
  const Tensor<double> b = tensor_1x1({4, 8});
  const Tensor<double> avg = aggregate(a, b, AggregationKind::Average);
  CHECK(avg.data[0] == 3.0);
  CHECK(avg.data[1] == 6.0);

  const Tensor<double> same = aggregate(a, a, AggregationKind::Average);
  CHECK(same.bit_equal(a));  // mean of equal inputs is exact
}

TEST_CASE("aggregate: channel stacking doubles the channel count in order") {
  Tensor<double> a(2, 3, 2, 2), b(2, 3, 2, 2);
  std::mt19937_64 rng(17);
  randomize(a, rng);
  randomize(b, rng);
  const Tensor<double> cat = aggregate(a, b, AggregationKind::Concatenate);
  CHECK(cat.c == 6);
  CHECK(cat.n == 2);
  CHECK(cat.h == 2);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i) {
        CHECK(cat.at(n, c, i / 2, i % 2) == a.at(n, c, i / 2, i % 2));
        CHECK(cat.at(n, c + 3, i / 2, i % 2) == b.at(n, c, i / 2, i % 2));
      }

  Tensor<double> wrong(2, 3, 2, 3);
  CHECK_THROWS_AS(aggregate(a, wrong, AggregationKind::Average), DimensionError);
  CHECK_THROWS_AS(aggregate(a, wrong, AggregationKind::Concatenate), DimensionError);
}

TEST_CASE("project_normalize: identity composition passes input through") {
  const int c = 3;
  FusionBlock<double> block(AggregationKind::Average, {}, c);
  block.proj.weight.fill(0.0);
  for (int i = 0; i < c; ++i) block.proj.weight.at(i, i, 0, 0) = 1.0;
  block.proj.bias.fill(0.0);
  block.bn.eps = 0.0;  // unit running variance, zero mean are the defaults
  Tensor<double> x(2, c, 4, 4);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> d(0.0, 2.0);  // non-negative input
  for (auto& v : x.data) v = d(rng);
  const Tensor<double> y = block.project_normalize(x, false);
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(y.data[i] == doctest::Approx(x.data[i]).epsilon(1e-15));
}

TEST_CASE("project_normalize: concatenate halves the width, average keeps it") {
  FusionBlock<double> cat(AggregationKind::Concatenate, {}, 128);
  Tensor<double> wide(2, 256, 8, 8);
  std::mt19937_64 rng(23);
  randomize(wide, rng);
  const Tensor<double> halved = cat.project_normalize(wide, true);
  CHECK(halved.c == 128);
  CHECK(halved.h == 8);

  FusionBlock<double> avg(AggregationKind::Average, {}, 16);
  Tensor<double> same(2, 16, 4, 4);
  randomize(same, rng);
  CHECK(avg.project_normalize(same, true).c == 16);

  Tensor<double> mismatched(2, 100, 8, 8);
  CHECK_THROWS_AS(cat.project_normalize(mismatched, true), DimensionError);
}

TEST_CASE("project_normalize output is rectified") {
  FusionBlock<double> block(AggregationKind::Average, {}, 4);
  std::mt19937_64 rng(29);
  block.init(rng);
  Tensor<double> x(3, 4, 5, 5);
  randomize(x, rng, 2.0);
  const Tensor<double> y = block.project_normalize(x, true);
  for (double v : y.data) CHECK(v >= 0.0);
}

TEST_CASE("apply_skip adds the flagged views") {
  const Tensor<double> fused = tensor_1x1({1});
  const Tensor<double> exam = tensor_1x1({2});
  const Tensor<double> aux = tensor_1x1({4});

  CHECK(apply_skip(fused, exam, aux, {false, false}).bit_equal(fused));
  CHECK(apply_skip(fused, exam, aux, {true, false}).data[0] == 3.0);
  CHECK(apply_skip(fused, exam, aux, {true, true}).data[0] == 7.0);
  CHECK(apply_skip(fused, exam, aux, {false, true}).data[0] == 5.0);

  const Tensor<double> bad = Tensor<double>(1, 1, 1, 3);
  CHECK_THROWS_AS(apply_skip(fused, bad, aux, {true, false}), DimensionError);
}

TEST_CASE("fuse_views: average is commutative, concatenate is not") {
  std::mt19937_64 rng(31);
  Tensor<double> a(2, 4, 3, 3), b(2, 4, 3, 3);
  randomize(a, rng);
  randomize(b, rng);

  FusionBlock<double> avg(AggregationKind::Average, {}, 4);
  avg.init(rng);
  const Tensor<double> ab = avg.forward(a, b, true);
  const Tensor<double> ba = avg.forward(b, a, true);
  CHECK(ab.bit_equal(ba));

  FusionBlock<double> cat(AggregationKind::Concatenate, {}, 4);
  cat.init(rng);
  const Tensor<double> cab = cat.forward(a, b, true);
  const Tensor<double> cba = cat.forward(b, a, true);
  double max_diff = 0.0;
  for (size_t i = 0; i < cab.size(); ++i)
    max_diff = std::max(max_diff, std::fabs(cab.data[i] - cba.data[i]));
  CHECK(max_diff > 1e-6);  // operand order matters

  // symmetric inputs agree under either aggregation
  const Tensor<double> caa1 = cat.forward(a, a, true);
  const Tensor<double> caa2 = cat.forward(a, a, true);
  CHECK(caa1.bit_equal(caa2));
}

TEST_CASE("width restoration holds at every fusion site") {
  const BackboneSpec spec = BackboneSpec::resnet18();
  for (const auto type : {FusionType::PreF, FusionType::EF, FusionType::MF,
                          FusionType::LF, FusionType::PostF}) {
    for (const auto kind : {AggregationKind::Average, AggregationKind::Concatenate}) {
      const NetworkPlan plan = plan_network({type, kind}, spec);
      const int w = plan.fusion_site.channels;
      FusionBlock<double> block(kind, {}, w);
      CHECK(block.proj.out_c == w);
      CHECK(block.proj.in_c == (kind == AggregationKind::Concatenate ? 2 * w : w));
    }
  }
}

TEST_CASE("eval-mode fusion is bit-deterministic") {
  std::mt19937_64 rng(37);
  FusionBlock<double> block(AggregationKind::Concatenate, {true, false}, 5);
  block.init(rng);
  Tensor<double> a(2, 5, 3, 3), b(2, 5, 3, 3);
  randomize(a, rng);
  randomize(b, rng);
  const Tensor<double> y1 = block.forward(a, b, false);
  const Tensor<double> y2 = block.forward(a, b, false);
  CHECK(y1.bit_equal(y2));
}

TEST_CASE("fusion gradients pass finite differences for all kind/flag combos") {
  const GradCheckReport report = gradcheck_fusion(11);
  CHECK(report.groups.size() == 8);
  CHECK(report.passed);
  CHECK(report.worst() <= 1e-3);
}

}  // TEST_SUITE
