#include <doctest.h>

#include <random>

#include "mvf/layers.hpp"

using namespace mvf;

namespace {

// Direct six-loop convolution, independent of the im2col path.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w,
                          const Tensor<double>* bias, int stride, int pad) {
  const int oc = w.n, ic = w.c, k = w.h;
  const int oh = (x.h + 2 * pad - k) / stride + 1;
  const int ow = (x.w + 2 * pad - k) / stride + 1;
  Tensor<double> y(x.n, oc, oh, ow);
  for (int n = 0; n < x.n; ++n)
    for (int o = 0; o < oc; ++o)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias ? bias->data[o] : 0.0;
          for (int ci = 0; ci < ic; ++ci)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const int iy = yy * stride + kh - pad;
                const int ix = xx * stride + kw - pad;
                if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                  acc += x.at(n, ci, iy, ix) * w.at(o, ci, kh, kw);
              }
          y.at(n, o, yy, xx) = acc;
        }
  return y;
}

void randomize(Tensor<double>& t, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  for (auto& v : t.data) v = d(rng);
}

double fd_loss(const std::function<double()>& f, double& slot, double eps) {
  const double orig = slot;
  slot = orig + eps;
  const double lp = f();
  slot = orig - eps;
  const double lm = f();
  slot = orig;
  return (lp - lm) / (2 * eps);
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("conv2d forward matches naive convolution") {
  std::mt19937_64 rng(5);
  for (const auto& [ic, oc, k, stride, pad] :
       {std::tuple{3, 4, 3, 1, 1}, std::tuple{2, 5, 3, 2, 1},
        std::tuple{4, 2, 1, 1, 0}, std::tuple{1, 6, 7, 2, 3}}) {
    Conv2d<double> conv(ic, oc, k, stride, pad, true);
    conv.init(rng);
    randomize(conv.bias, rng, 0.5);
    Tensor<double> x(2, ic, 9, 9);
    randomize(x, rng);
    const Tensor<double> got = conv.forward(x, true);
    const Tensor<double> want = naive_conv(x, conv.weight, &conv.bias, stride, pad);
    REQUIRE(got.same_shape(want));
    for (size_t i = 0; i < got.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937_64 rng(7);
  Conv2d<double> conv(2, 3, 3, 2, 1, true);
  conv.init(rng);
  Tensor<double> x(2, 2, 6, 6), sens(2, 3, 3, 3);
  randomize(x, rng);
  randomize(sens, rng);

  const auto loss = [&]() {
    const Tensor<double> y = conv.forward(x, true);
    double s = 0.0;
    for (size_t i = 0; i < y.size(); ++i) s += y.data[i] * sens.data[i];
    return s;
  };

  conv.grad_weight.fill(0.0);
  conv.grad_bias.fill(0.0);
  conv.forward(x, true);
  const Tensor<double> dx = conv.backward(sens);

  for (size_t i = 0; i < conv.weight.size(); ++i)
    CHECK(conv.grad_weight.data[i] ==
          doctest::Approx(fd_loss(loss, conv.weight.data[i], 1e-6)).epsilon(1e-6));
  for (size_t i = 0; i < conv.bias.size(); ++i)
    CHECK(conv.grad_bias.data[i] ==
          doctest::Approx(fd_loss(loss, conv.bias.data[i], 1e-6)).epsilon(1e-6));
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(dx.data[i] ==
          doctest::Approx(fd_loss(loss, x.data[i], 1e-6)).epsilon(1e-6));
}

TEST_CASE("batchnorm train mode normalizes and backprop matches FD") {
  std::mt19937_64 rng(9);
  BatchNorm2d<double> bn(3);
  randomize(bn.scale, rng, 0.3);
  for (auto& v : bn.scale.data) v += 1.0;
  randomize(bn.shift, rng, 0.3);
  Tensor<double> x(4, 3, 5, 5), sens(4, 3, 5, 5);
  randomize(x, rng);
  randomize(sens, rng);

  const Tensor<double> y = bn.forward(x, true);
  // per-channel standardized activations
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    const size_t m = 4 * 25;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 25; ++i)
        mean += (y.at(n, c, i / 5, i % 5) - bn.shift.data[c]) / bn.scale.data[c];
    mean /= m;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 25; ++i) {
        const double xh = (y.at(n, c, i / 5, i % 5) - bn.shift.data[c]) / bn.scale.data[c];
        var += xh * xh;
      }
    var /= m;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps shrinks it slightly
  }

  const auto loss = [&]() {
    const Tensor<double> out = bn.forward(x, true);
    double s = 0.0;
    for (size_t i = 0; i < out.size(); ++i) s += out.data[i] * sens.data[i];
    return s;
  };
  bn.grad_scale.fill(0.0);
  bn.grad_shift.fill(0.0);
  bn.forward(x, true);
  const Tensor<double> dx = bn.backward(sens);
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(dx.data[i] == doctest::Approx(fd_loss(loss, x.data[i], 1e-6)).epsilon(1e-5));
  for (size_t i = 0; i < bn.scale.size(); ++i)
    CHECK(bn.grad_scale.data[i] ==
          doctest::Approx(fd_loss(loss, bn.scale.data[i], 1e-6)).epsilon(1e-6));
  for (size_t i = 0; i < bn.shift.size(); ++i)
    CHECK(bn.grad_shift.data[i] ==
          doctest::Approx(fd_loss(loss, bn.shift.data[i], 1e-6)).epsilon(1e-6));
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  BatchNorm2d<double> bn(1);
  bn.running_mean.data[0] = 2.0;
  bn.running_var.data[0] = 4.0;
  bn.eps = 0.0;
  Tensor<double> x(1, 1, 1, 2);
  x.data = {4.0, 0.0};
  const Tensor<double> y = bn.forward(x, false);
  CHECK(y.data[0] == doctest::Approx(1.0));
  CHECK(y.data[1] == doctest::Approx(-1.0));
}

TEST_CASE("maxpool forward/backward") {
  Tensor<double> x(1, 1, 4, 4);
  for (int i = 0; i < 16; ++i) x.data[i] = i;
  MaxPool2d<double> pool;
  const Tensor<double> y = pool.forward(x, true);
  REQUIRE(y.h == 2);
  REQUIRE(y.w == 2);
  CHECK(y.at(0, 0, 0, 0) == 5.0);
  CHECK(y.at(0, 0, 0, 1) == 7.0);
  CHECK(y.at(0, 0, 1, 0) == 13.0);
  CHECK(y.at(0, 0, 1, 1) == 15.0);
  Tensor<double> dy(1, 1, 2, 2);
  dy.fill(1.0);
  const Tensor<double> dx = pool.backward(dy);
  CHECK(dx.data[5] == 1.0);
  CHECK(dx.data[7] == 1.0);
  CHECK(dx.data[13] == 1.0);
  CHECK(dx.data[15] == 1.0);
  double total = 0.0;
  for (double v : dx.data) total += v;
  CHECK(total == 4.0);
}

TEST_CASE("global average pool and linear layer") {
  std::mt19937_64 rng(13);
  GlobalAvgPool<double> gap;
  Tensor<double> x(2, 3, 4, 4);
  randomize(x, rng);
  const Tensor<double> y = gap.forward(x, true);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int i = 0; i < 16; ++i) mean += x.at(n, c, i / 4, i % 4);
      CHECK(y.at(n, c, 0, 0) == doctest::Approx(mean / 16).epsilon(1e-12));
    }

  Linear<double> fc(3, 2);
  fc.init(rng);
  Tensor<double> sens = Tensor<double>::vec(2, 2);
  randomize(sens, rng);
  const auto loss = [&]() {
    const Tensor<double> out = fc.forward(y, true);
    double s = 0.0;
    for (size_t i = 0; i < out.size(); ++i) s += out.data[i] * sens.data[i];
    return s;
  };
  fc.grad_weight.fill(0.0);
  fc.grad_bias.fill(0.0);
  fc.forward(y, true);
  const Tensor<double> dxl = fc.backward(sens);
  for (size_t i = 0; i < fc.weight.size(); ++i)
    CHECK(fc.grad_weight.data[i] ==
          doctest::Approx(fd_loss(loss, fc.weight.data[i], 1e-6)).epsilon(1e-7));
  for (size_t i = 0; i < dxl.size(); ++i) {
    Tensor<double>& ym = const_cast<Tensor<double>&>(y);
    CHECK(dxl.data[i] == doctest::Approx(fd_loss(loss, ym.data[i], 1e-6)).epsilon(1e-7));
  }
}

}  // TEST_SUITE
