#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mvf/layers.hpp"
#include "mvf/plan.hpp"

namespace mvf {

/// Pixel-wise mean (Average) or channel stacking (Concatenate) of the two
/// coarse features. For flattened 1x1 features, concatenation stacks along
/// the node axis, which is the channel axis of a (N,C,1,1) tensor.
template <typename T>
Tensor<T> aggregate(const Tensor<T>& a, const Tensor<T>& b, AggregationKind kind) {
  if (!a.same_shape(b)) throw DimensionError("aggregate: view shapes differ");
  if (kind == AggregationKind::Average) {
    Tensor<T> out(a.n, a.c, a.h, a.w);
    for (size_t i = 0; i < a.size(); ++i)
      out.data[i] = (a.data[i] + b.data[i]) / T(2);
    return out;
  }
  Tensor<T> out(a.n, 2 * a.c, a.h, a.w);
  const size_t per = static_cast<size_t>(a.c) * a.h * a.w;
  for (int ni = 0; ni < a.n; ++ni) {
    std::memcpy(out.channel_ptr(ni, 0), a.data.data() + per * ni, per * sizeof(T));
    std::memcpy(out.channel_ptr(ni, a.c), b.data.data() + per * ni, per * sizeof(T));
  }
  return out;
}

/// Adds the flagged coarse views onto the fused feature, element-wise.
template <typename T>
Tensor<T> apply_skip(const Tensor<T>& fused, const Tensor<T>& coarse_examined,
                     const Tensor<T>& coarse_auxiliary, SkipFlags flags) {
  Tensor<T> out = fused;
  if (flags.examined) add_inplace(out, coarse_examined);
  if (flags.auxiliary) add_inplace(out, coarse_auxiliary);
  return out;
}

/// Aggregation, stabilizing 1x1 projection (dense at the flattened site),
/// batch norm, skip additions, rectification. Skips join after the norm and
/// before the final ReLU so both paths share one rectification.
template <typename T>
struct FusionBlock {
  AggregationKind kind = AggregationKind::Concatenate;
  SkipFlags flags;
  int view_width = 0;
  Conv2d<T> proj;  // 1x1; acts as a dense layer on (N,C,1,1) features
  BatchNorm2d<T> bn;
  ReLU<T> relu;

  FusionBlock() = default;
  FusionBlock(AggregationKind kind_, SkipFlags flags_, int view_width_)
      : kind(kind_), flags(flags_), view_width(view_width_),
        proj(kind_ == AggregationKind::Concatenate ? 2 * view_width_ : view_width_,
             view_width_, 1, 1, 0, /*bias=*/true),
        bn(view_width_) {}

  void init(std::mt19937_64& rng) { proj.init(rng); }

  Tensor<T> project_normalize(const Tensor<T>& fused, bool train) {
    if (fused.c != proj.in_c)
      throw DimensionError("fusion projection: width mismatch");
    return relu.forward(bn.forward(proj.forward(fused, train), train), train);
  }

  Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& b, bool train) {
    Tensor<T> y = bn.forward(proj.forward(aggregate(a, b, kind), train), train);
    y = apply_skip(y, a, b, flags);
    return relu.forward(y, train);
  }

  /// Returns (d_examined, d_auxiliary).
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
    Tensor<T> d = relu.backward(dy);
    Tensor<T> dagg = proj.backward(bn.backward(d));
    Tensor<T> da, db;
    if (kind == AggregationKind::Average) {
      da = Tensor<T>(dagg.n, dagg.c, dagg.h, dagg.w);
      db = Tensor<T>(dagg.n, dagg.c, dagg.h, dagg.w);
      for (size_t i = 0; i < dagg.size(); ++i) {
        da.data[i] = dagg.data[i] / T(2);
        db.data[i] = dagg.data[i] / T(2);
      }
    } else {
      const int half = dagg.c / 2;
      da = Tensor<T>(dagg.n, half, dagg.h, dagg.w);
      db = Tensor<T>(dagg.n, half, dagg.h, dagg.w);
      const size_t per = static_cast<size_t>(half) * dagg.h * dagg.w;
      for (int ni = 0; ni < dagg.n; ++ni) {
        std::memcpy(da.data.data() + per * ni, dagg.channel_ptr(ni, 0), per * sizeof(T));
        std::memcpy(db.data.data() + per * ni, dagg.channel_ptr(ni, half), per * sizeof(T));
      }
    }
    if (flags.examined) add_inplace(da, d);
    if (flags.auxiliary) add_inplace(db, d);
    return {std::move(da), std::move(db)};
  }

  void collect(std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>& buffers) {
    proj.collect("fusion/proj", params, buffers);
    bn.collect("fusion/bn", params, buffers);
  }
};

}  // namespace mvf
