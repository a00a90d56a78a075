#pragma once

#include <cstddef>
#include <cstring>
#include <vector>

#include "mvf/errors.hpp"

namespace mvf {

/// Dense NCHW tensor. Vectors are stored as (n, c, 1, 1).
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
      throw DimensionError("tensor dimensions must be positive");
    data.assign(static_cast<size_t>(n_) * c_ * h_ * w_, T(0));
  }

  static Tensor vec(int n_, int c_) { return Tensor(n_, c_, 1, 1); }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  T& at(int ni, int ci, int hi, int wi) {
    return data[((static_cast<size_t>(ni) * c + ci) * h + hi) * w + wi];
  }
  T at(int ni, int ci, int hi, int wi) const {
    return data[((static_cast<size_t>(ni) * c + ci) * h + hi) * w + wi];
  }

  T* channel_ptr(int ni, int ci) {
    return data.data() + (static_cast<size_t>(ni) * c + ci) * h * w;
  }
  const T* channel_ptr(int ni, int ci) const {
    return data.data() + (static_cast<size_t>(ni) * c + ci) * h * w;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  /// Batch slice [lo, hi) copied out as a new tensor.
  Tensor slice_batch(int lo, int hi) const {
    if (lo < 0 || hi <= lo || hi > n) throw DimensionError("bad batch slice");
    Tensor out(hi - lo, c, h, w);
    const size_t per = static_cast<size_t>(c) * h * w;
    std::memcpy(out.data.data(), data.data() + per * lo,
                per * (hi - lo) * sizeof(T));
    return out;
  }

  /// Concatenates along the batch axis.
  static Tensor stack_batch(const Tensor& a, const Tensor& b) {
    if (a.c != b.c || a.h != b.h || a.w != b.w)
      throw DimensionError("stack_batch: shape mismatch");
    Tensor out(a.n + b.n, a.c, a.h, a.w);
    std::memcpy(out.data.data(), a.data.data(), a.size() * sizeof(T));
    std::memcpy(out.data.data() + a.size(), b.data.data(),
                b.size() * sizeof(T));
    return out;
  }

  bool bit_equal(const Tensor& o) const {
    return same_shape(o) &&
           std::memcmp(data.data(), o.data.data(), size() * sizeof(T)) == 0;
  }
};

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  if (!dst.same_shape(src)) throw DimensionError("add: shape mismatch");
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace mvf
