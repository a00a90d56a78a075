#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mvf/tensor.hpp"

namespace mvf {

// Layers cache activations for backward only during train-mode forwards, so
// eval-mode forwards on a frozen instance are read-only and may be shared
// across threads. backward() is valid only after a train-mode forward.

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

/// Non-learnable persistent state (batch-norm running statistics).
template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value;
};

template <typename T>
void he_normal_init(Tensor<T>& t, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

template <typename T>
void uniform_fan_in_init(Tensor<T>& t, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

/// 2-D convolution, square kernel, zero padding, im2col + GEMM.
template <typename T>
struct Conv2d {
  int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
  bool has_bias = false;
  Tensor<T> weight, grad_weight;  // (out_c, in_c, k, k)
  Tensor<T> bias, grad_bias;      // (out_c, 1, 1, 1)
  Tensor<T> x_cache;
  std::vector<T> col;  // train-mode scratch, (in_c*k*k) x (oh*ow)

  Conv2d() = default;
  Conv2d(int in_c_, int out_c_, int k_, int stride_, int pad_, bool bias_)
      : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_),
        has_bias(bias_), weight(out_c_, in_c_, k_, k_),
        grad_weight(out_c_, in_c_, k_, k_) {
    if (has_bias) {
      bias = Tensor<T>::vec(out_c_, 1);
      grad_bias = Tensor<T>::vec(out_c_, 1);
    }
  }

  void init(std::mt19937_64& rng) {
    he_normal_init(weight, in_c * k * k, rng);
    if (has_bias) bias.fill(T(0));
  }

  int out_dim(int d) const { return (d + 2 * pad - k) / stride + 1; }

  void im2col(const Tensor<T>& x, int ni, int oh, int ow, std::vector<T>& buf) const {
    const int kk = in_c * k * k;
    const size_t plane = static_cast<size_t>(oh) * ow;
    if (buf.size() != static_cast<size_t>(kk) * plane)
      buf.assign(static_cast<size_t>(kk) * plane, T(0));
    for (int ci = 0; ci < in_c; ++ci) {
      const T* src = x.channel_ptr(ni, ci);
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          T* dst = buf.data() + (static_cast<size_t>(ci) * k * k + kh * k + kw) * plane;
          for (int y = 0; y < oh; ++y) {
            const int iy = y * stride + kh - pad;
            if (iy < 0 || iy >= x.h) {
              std::fill(dst + static_cast<size_t>(y) * ow,
                        dst + static_cast<size_t>(y + 1) * ow, T(0));
              continue;
            }
            const T* row = src + static_cast<size_t>(iy) * x.w;
            for (int xo = 0; xo < ow; ++xo) {
              const int ix = xo * stride + kw - pad;
              dst[static_cast<size_t>(y) * ow + xo] =
                  (ix >= 0 && ix < x.w) ? row[ix] : T(0);
            }
          }
        }
      }
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.c != in_c) throw DimensionError("conv: channel mismatch");
    const int oh = out_dim(x.h), ow = out_dim(x.w);
    if (oh <= 0 || ow <= 0) throw DimensionError("conv: output collapsed");
    Tensor<T> y(x.n, out_c, oh, ow);
    const int kk = in_c * k * k;
    const size_t plane = static_cast<size_t>(oh) * ow;
    std::vector<T> local;
    std::vector<T>& buf = train ? col : local;
    Eigen::Map<const MatRM<T>> wmat(weight.data.data(), out_c, kk);
    for (int ni = 0; ni < x.n; ++ni) {
      im2col(x, ni, oh, ow, buf);
      Eigen::Map<const MatRM<T>> cmat(buf.data(), kk, plane);
      Eigen::Map<MatRM<T>> ymat(y.channel_ptr(ni, 0), out_c, plane);
      ymat.noalias() = wmat * cmat;
      if (has_bias)
        for (int oc = 0; oc < out_c; ++oc)
          ymat.row(oc).array() += bias.data[oc];
    }
    if (train) x_cache = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = x_cache;
    const int oh = dy.h, ow = dy.w;
    const int kk = in_c * k * k;
    const size_t plane = static_cast<size_t>(oh) * ow;
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    Eigen::Map<const MatRM<T>> wmat(weight.data.data(), out_c, kk);
    Eigen::Map<MatRM<T>> gwmat(grad_weight.data.data(), out_c, kk);
    MatRM<T> dcol(kk, plane);
    for (int ni = 0; ni < x.n; ++ni) {
      Eigen::Map<const MatRM<T>> dymat(dy.channel_ptr(ni, 0), out_c, plane);
      im2col(x, ni, oh, ow, col);
      Eigen::Map<const MatRM<T>> cmat(col.data(), kk, plane);
      gwmat.noalias() += dymat * cmat.transpose();
      if (has_bias) {
        // fixed-order accumulation; vectorized reductions vary with the
        // heap alignment of dy and would break bit-reproducibility
        for (int oc = 0; oc < out_c; ++oc) {
          const T* row = dy.channel_ptr(ni, oc);
          T s = T(0);
          for (size_t i = 0; i < plane; ++i) s += row[i];
          grad_bias.data[oc] += s;
        }
      }
      dcol.noalias() = wmat.transpose() * dymat;
      // col2im scatter-add
      for (int ci = 0; ci < in_c; ++ci) {
        T* dst = dx.channel_ptr(ni, ci);
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const T* src = dcol.data() + (static_cast<size_t>(ci) * k * k + kh * k + kw) * plane;
            for (int y = 0; y < oh; ++y) {
              const int iy = y * stride + kh - pad;
              if (iy < 0 || iy >= x.h) continue;
              for (int xo = 0; xo < ow; ++xo) {
                const int ix = xo * stride + kw - pad;
                if (ix >= 0 && ix < x.w)
                  dst[static_cast<size_t>(iy) * x.w + ix] +=
                      src[static_cast<size_t>(y) * ow + xo];
              }
            }
          }
        }
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) {
    (void)buffers;
    params.push_back({prefix + "/weight", &weight, &grad_weight});
    if (has_bias) params.push_back({prefix + "/bias", &bias, &grad_bias});
  }
};

/// Batch normalization over (N,H,W) per channel. Running statistics use the
/// biased batch variance with momentum 0.1, epsilon 1e-5.
template <typename T>
struct BatchNorm2d {
  int c = 0;
  T momentum = T(0.1), eps = T(1e-5);
  Tensor<T> scale, shift, grad_scale, grad_shift;
  Tensor<T> running_mean, running_var;
  // train-mode caches for backward
  Tensor<T> xhat_cache;
  std::vector<T> inv_std_cache;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int c_)
      : c(c_), scale(Tensor<T>::vec(c_, 1)), shift(Tensor<T>::vec(c_, 1)),
        grad_scale(Tensor<T>::vec(c_, 1)), grad_shift(Tensor<T>::vec(c_, 1)),
        running_mean(Tensor<T>::vec(c_, 1)), running_var(Tensor<T>::vec(c_, 1)) {
    scale.fill(T(1));
    running_var.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.c != c) throw DimensionError("batchnorm: channel mismatch");
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const size_t m = static_cast<size_t>(x.n) * plane;
    Tensor<T> y(x.n, x.c, x.h, x.w);
    if (train) {
      xhat_cache = Tensor<T>(x.n, x.c, x.h, x.w);
      inv_std_cache.assign(c, T(0));
    }
    for (int ci = 0; ci < c; ++ci) {
      T mean, var;
      if (train) {
        double s = 0.0;
        for (int ni = 0; ni < x.n; ++ni) {
          const T* p = x.channel_ptr(ni, ci);
          for (size_t i = 0; i < plane; ++i) s += p[i];
        }
        mean = static_cast<T>(s / m);
        double v = 0.0;
        for (int ni = 0; ni < x.n; ++ni) {
          const T* p = x.channel_ptr(ni, ci);
          for (size_t i = 0; i < plane; ++i) {
            const double d = p[i] - mean;
            v += d * d;
          }
        }
        var = static_cast<T>(v / m);
        running_mean.data[ci] = (T(1) - momentum) * running_mean.data[ci] + momentum * mean;
        running_var.data[ci] = (T(1) - momentum) * running_var.data[ci] + momentum * var;
      } else {
        mean = running_mean.data[ci];
        var = running_var.data[ci];
      }
      const T istd = T(1) / std::sqrt(var + eps);
      const T g = scale.data[ci], b = shift.data[ci];
      if (train) {
        inv_std_cache[ci] = istd;
        for (int ni = 0; ni < x.n; ++ni) {
          const T* p = x.channel_ptr(ni, ci);
          T* xh = xhat_cache.channel_ptr(ni, ci);
          T* yo = y.channel_ptr(ni, ci);
          for (size_t i = 0; i < plane; ++i) {
            xh[i] = (p[i] - mean) * istd;
            yo[i] = g * xh[i] + b;
          }
        }
      } else {
        for (int ni = 0; ni < x.n; ++ni) {
          const T* p = x.channel_ptr(ni, ci);
          T* yo = y.channel_ptr(ni, ci);
          for (size_t i = 0; i < plane; ++i) yo[i] = g * (p[i] - mean) * istd + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const size_t plane = static_cast<size_t>(dy.h) * dy.w;
    const size_t m = static_cast<size_t>(dy.n) * plane;
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (int ci = 0; ci < c; ++ci) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int ni = 0; ni < dy.n; ++ni) {
        const T* d = dy.channel_ptr(ni, ci);
        const T* xh = xhat_cache.channel_ptr(ni, ci);
        for (size_t i = 0; i < plane; ++i) {
          sum_dy += d[i];
          sum_dy_xhat += d[i] * xh[i];
        }
      }
      grad_shift.data[ci] += static_cast<T>(sum_dy);
      grad_scale.data[ci] += static_cast<T>(sum_dy_xhat);
      const T g = scale.data[ci], istd = inv_std_cache[ci];
      const T a = static_cast<T>(sum_dy / m), b = static_cast<T>(sum_dy_xhat / m);
      for (int ni = 0; ni < dy.n; ++ni) {
        const T* d = dy.channel_ptr(ni, ci);
        const T* xh = xhat_cache.channel_ptr(ni, ci);
        T* o = dx.channel_ptr(ni, ci);
        for (size_t i = 0; i < plane; ++i)
          o[i] = g * istd * (d[i] - a - xh[i] * b);
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) {
    params.push_back({prefix + "/scale", &scale, &grad_scale});
    params.push_back({prefix + "/shift", &shift, &grad_shift});
    buffers.push_back({prefix + "/running_mean", &running_mean});
    buffers.push_back({prefix + "/running_var", &running_var});
  }
};

template <typename T>
struct ReLU {
  Tensor<T> y_cache;

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> y(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); ++i)
      y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    if (train) y_cache = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.size(); ++i)
      dx.data[i] = y_cache.data[i] > T(0) ? dy.data[i] : T(0);
    return dx;
  }
};

/// Max pooling, 3x3 window, stride 2, padding 1 (canonical stem pool).
template <typename T>
struct MaxPool2d {
  int k = 3, stride = 2, pad = 1;
  std::vector<size_t> argmax;
  int in_n = 0, in_c = 0, in_h = 0, in_w = 0;

  int out_dim(int d) const { return (d + 2 * pad - k) / stride + 1; }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    const int oh = out_dim(x.h), ow = out_dim(x.w);
    if (oh <= 0 || ow <= 0) throw DimensionError("maxpool: output collapsed");
    if (train) {
      in_n = x.n;
      in_c = x.c;
      in_h = x.h;
      in_w = x.w;
    }
    Tensor<T> y(x.n, x.c, oh, ow);
    if (train) argmax.assign(y.size(), 0);
    size_t oi = 0;
    for (int ni = 0; ni < x.n; ++ni) {
      for (int ci = 0; ci < x.c; ++ci) {
        const T* src = x.channel_ptr(ni, ci);
        const size_t base = (static_cast<size_t>(ni) * x.c + ci) * x.h * x.w;
        for (int yo = 0; yo < oh; ++yo) {
          for (int xo = 0; xo < ow; ++xo, ++oi) {
            T best{};
            size_t best_idx = 0;
            bool first = true;
            for (int kh = 0; kh < k; ++kh) {
              const int iy = yo * stride + kh - pad;
              if (iy < 0 || iy >= x.h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int ix = xo * stride + kw - pad;
                if (ix < 0 || ix >= x.w) continue;
                const T v = src[static_cast<size_t>(iy) * x.w + ix];
                if (first || v > best) {
                  best = v;
                  best_idx = base + static_cast<size_t>(iy) * x.w + ix;
                  first = false;
                }
              }
            }
            y.data[oi] = best;
            if (train) argmax[oi] = best_idx;
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(in_n, in_c, in_h, in_w);
    for (size_t i = 0; i < dy.size(); ++i) dx.data[argmax[i]] += dy.data[i];
    return dx;
  }
};

/// Global average pool: (N,C,H,W) -> (N,C,1,1).
template <typename T>
struct GlobalAvgPool {
  int in_h = 0, in_w = 0;

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (train) {
      in_h = x.h;
      in_w = x.w;
    }
    Tensor<T> y(x.n, x.c, 1, 1);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int ni = 0; ni < x.n; ++ni) {
      for (int ci = 0; ci < x.c; ++ci) {
        const T* p = x.channel_ptr(ni, ci);
        double s = 0.0;
        for (size_t i = 0; i < plane; ++i) s += p[i];
        y.at(ni, ci, 0, 0) = static_cast<T>(s / plane);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, in_h, in_w);
    const size_t plane = static_cast<size_t>(in_h) * in_w;
    for (int ni = 0; ni < dy.n; ++ni) {
      for (int ci = 0; ci < dy.c; ++ci) {
        const T g = dy.at(ni, ci, 0, 0) / static_cast<T>(plane);
        T* p = dx.channel_ptr(ni, ci);
        for (size_t i = 0; i < plane; ++i) p[i] = g;
      }
    }
    return dx;
  }
};

/// Fully connected layer on (N, in, 1, 1) tensors.
template <typename T>
struct Linear {
  int in_f = 0, out_f = 0;
  Tensor<T> weight, grad_weight;  // (out, in, 1, 1)
  Tensor<T> bias, grad_bias;      // (out, 1, 1, 1)
  Tensor<T> x_cache;

  Linear() = default;
  Linear(int in_, int out_)
      : in_f(in_), out_f(out_), weight(out_, in_, 1, 1),
        grad_weight(out_, in_, 1, 1), bias(Tensor<T>::vec(out_, 1)),
        grad_bias(Tensor<T>::vec(out_, 1)) {}

  void init(std::mt19937_64& rng) {
    uniform_fan_in_init(weight, in_f, rng);
    uniform_fan_in_init(bias, in_f, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.c != in_f || x.h != 1 || x.w != 1)
      throw DimensionError("linear: input width mismatch");
    if (train) x_cache = x;
    Tensor<T> y = Tensor<T>::vec(x.n, out_f);
    Eigen::Map<const MatRM<T>> xm(x.data.data(), x.n, in_f);
    Eigen::Map<const MatRM<T>> wm(weight.data.data(), out_f, in_f);
    Eigen::Map<MatRM<T>> ym(y.data.data(), x.n, out_f);
    ym.noalias() = xm * wm.transpose();
    for (int ni = 0; ni < x.n; ++ni)
      for (int o = 0; o < out_f; ++o) y.data[static_cast<size_t>(ni) * out_f + o] += bias.data[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx = Tensor<T>::vec(x_cache.n, in_f);
    Eigen::Map<const MatRM<T>> dym(dy.data.data(), dy.n, out_f);
    Eigen::Map<const MatRM<T>> xm(x_cache.data.data(), x_cache.n, in_f);
    Eigen::Map<const MatRM<T>> wm(weight.data.data(), out_f, in_f);
    Eigen::Map<MatRM<T>> gwm(grad_weight.data.data(), out_f, in_f);
    Eigen::Map<MatRM<T>> dxm(dx.data.data(), dx.n, in_f);
    gwm.noalias() += dym.transpose() * xm;
    for (int ni = 0; ni < dy.n; ++ni)
      for (int o = 0; o < out_f; ++o) grad_bias.data[o] += dy.data[static_cast<size_t>(ni) * out_f + o];
    dxm.noalias() = dym * wm;
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) {
    (void)buffers;
    params.push_back({prefix + "/weight", &weight, &grad_weight});
    params.push_back({prefix + "/bias", &bias, &grad_bias});
  }
};

}  // namespace mvf
