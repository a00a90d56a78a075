#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mvf/backbone.hpp"
#include "mvf/fusion.hpp"
#include "mvf/layers.hpp"
#include "mvf/plan.hpp"

namespace mvf {

/// Two-view fusion network: shared-weight Coarse Layer applied to both views,
/// fusion block at the planned split, Fine Layer, global average pool and a
/// 2-logit classifier head.
///
/// A model instance is single-writer: forward/backward is not re-entrant.
template <typename T>
struct FusionModel {
  FusionConfig config;
  BackboneSpec spec;
  NetworkPlan plan;
  Backbone<T> net;
  FusionBlock<T> fusion;
  GlobalAvgPool<T> gap_coarse;  // PostF only
  GlobalAvgPool<T> gap_fine;
  Linear<T> fc;
  int batch_cache = 0;

  FusionModel(const FusionConfig& cfg, const BackboneSpec& sp, uint64_t seed)
      : config(cfg), spec(sp), plan(plan_network(cfg, sp)), net(sp),
        fusion(cfg.aggregation, cfg.skip, plan.fusion_site.channels),
        fc(sp.stage_widths.back(), 2) {
    std::mt19937_64 rng(seed);
    net.init(rng);
    fusion.init(rng);
    fc.init(rng);
  }

  int coarse_count() const { return static_cast<int>(plan.coarse_blocks.size()); }

  /// C(x): identity for an empty Coarse Layer; for PostF includes the global
  /// pool so the result is the flattened 512-vector as a (N,512,1,1) tensor.
  Tensor<T> coarse_forward(const Tensor<T>& x, bool train) {
    Tensor<T> y = x;
    if (coarse_count() > 0) y = net.forward_blocks(y, 1, coarse_count(), train);
    if (plan.pool_in_coarse) y = gap_coarse.forward(y, train);
    return y;
  }

  Tensor<T> fuse(const Tensor<T>& a, const Tensor<T>& b, bool train) {
    return fusion.forward(a, b, train);
  }

  Tensor<T> fine_forward(const Tensor<T>& fused, bool train) {
    Tensor<T> y = fused;
    if (coarse_count() < 5) y = net.forward_blocks(y, coarse_count() + 1, 5, train);
    y = gap_fine.forward(y, train);  // identity on already-flattened features
    return fc.forward(y, train);
  }

  /// Full pass. Both views run through one shared-weight Coarse Layer
  /// application as a stacked 2B batch (a training batch of B cases carries
  /// 2B images), so coarse batch-norm statistics span both views.
  Tensor<T> forward(const Tensor<T>& examined, const Tensor<T>& auxiliary, bool train) {
    if (!examined.same_shape(auxiliary))
      throw DimensionError("forward: view shapes differ");
    const int cases = examined.n;
    if (train) batch_cache = cases;
    Tensor<T> both = Tensor<T>::stack_batch(examined, auxiliary);
    Tensor<T> coarse = coarse_forward(both, train);
    Tensor<T> a = coarse.slice_batch(0, cases);
    Tensor<T> b = coarse.slice_batch(cases, 2 * cases);
    return fine_forward(fuse(a, b, train), train);
  }

  void backward(const Tensor<T>& dlogits) {
    Tensor<T> d = gap_fine.backward(fc.backward(dlogits));
    if (coarse_count() < 5) d = net.backward_blocks(d, coarse_count() + 1, 5);
    auto [da, db] = fusion.backward(d);
    if (coarse_count() == 0) return;
    Tensor<T> dboth = Tensor<T>::stack_batch(da, db);
    if (plan.pool_in_coarse) dboth = gap_coarse.backward(dboth);
    net.backward_blocks(dboth, 1, coarse_count());
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> params;
    std::vector<BufferRef<T>> buffers;
    net.collect(params, buffers);
    fusion.collect(params, buffers);
    fc.collect("head/fc", params, buffers);
    return params;
  }

  std::vector<BufferRef<T>> buffers() {
    std::vector<ParamRef<T>> params;
    std::vector<BufferRef<T>> buffers;
    net.collect(params, buffers);
    fusion.collect(params, buffers);
    fc.collect("head/fc", params, buffers);
    return buffers;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->fill(T(0));
  }

  long long count_parameters() {
    long long total = 0;
    for (auto& p : parameters()) total += static_cast<long long>(p.value->size());
    return total;
  }

  long long fusion_parameter_count() {
    long long total = 0;
    for (auto& p : parameters())
      if (p.name.rfind("fusion/proj", 0) == 0)
        total += static_cast<long long>(p.value->size());
    return total;
  }
};

}  // namespace mvf
