#pragma once

#include <random>
#include <string>
#include <vector>

#include "mvf/layers.hpp"
#include "mvf/plan.hpp"

namespace mvf {

/// Block 1: 7x7 stride-2 convolution, batch norm, ReLU, stride-2 max pool.
template <typename T>
struct StemBlock {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;
  ReLU<T> relu;
  MaxPool2d<T> pool;

  StemBlock() = default;
  StemBlock(int in_c, int width)
      : conv(in_c, width, 7, 2, 3, /*bias=*/false), bn(width) {}

  void init(std::mt19937_64& rng) { conv.init(rng); }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    return pool.forward(relu.forward(bn.forward(conv.forward(x, train), train), train),
                        train);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    return conv.backward(bn.backward(relu.backward(pool.backward(dy))));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) {
    conv.collect(prefix + "/layer0/conv", params, buffers);
    bn.collect(prefix + "/layer0/bn", params, buffers);
  }
};

/// Two 3x3 convolutions with batch norm and an identity (or 1x1 projection)
/// shortcut.
template <typename T>
struct BasicBlock {
  Conv2d<T> conv1, conv2;
  BatchNorm2d<T> bn1, bn2;
  ReLU<T> relu1, relu2;
  bool has_down = false;
  Conv2d<T> down_conv;
  BatchNorm2d<T> down_bn;

  BasicBlock() = default;
  BasicBlock(int in_c, int out_c, int stride)
      : conv1(in_c, out_c, 3, stride, 1, false), conv2(out_c, out_c, 3, 1, 1, false),
        bn1(out_c), bn2(out_c), has_down(stride != 1 || in_c != out_c) {
    if (has_down) {
      down_conv = Conv2d<T>(in_c, out_c, 1, stride, 0, false);
      down_bn = BatchNorm2d<T>(out_c);
    }
  }

  void init(std::mt19937_64& rng) {
    conv1.init(rng);
    conv2.init(rng);
    if (has_down) down_conv.init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> y = bn2.forward(
        conv2.forward(relu1.forward(bn1.forward(conv1.forward(x, train), train), train),
                      train),
        train);
    if (has_down) {
      add_inplace(y, down_bn.forward(down_conv.forward(x, train), train));
    } else {
      add_inplace(y, x);
    }
    return relu2.forward(y, train);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> d = relu2.backward(dy);
    Tensor<T> dx = conv1.backward(
        bn1.backward(relu1.backward(conv2.backward(bn2.backward(d)))));
    if (has_down) {
      add_inplace(dx, down_conv.backward(down_bn.backward(d)));
    } else {
      add_inplace(dx, d);
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) {
    conv1.collect(prefix + "/conv1", params, buffers);
    bn1.collect(prefix + "/bn1", params, buffers);
    conv2.collect(prefix + "/conv2", params, buffers);
    bn2.collect(prefix + "/bn2", params, buffers);
    if (has_down) {
      down_conv.collect(prefix + "/down_conv", params, buffers);
      down_bn.collect(prefix + "/down_bn", params, buffers);
    }
  }
};

template <typename T>
struct ResidualStage {
  std::vector<BasicBlock<T>> units;

  ResidualStage() = default;
  ResidualStage(int in_c, int out_c, int count, int first_stride) {
    units.emplace_back(in_c, out_c, first_stride);
    for (int i = 1; i < count; ++i) units.emplace_back(out_c, out_c, 1);
  }

  void init(std::mt19937_64& rng) {
    for (auto& u : units) u.init(rng);
  }

  Tensor<T> forward(Tensor<T> x, bool train) {
    for (auto& u : units) x = u.forward(x, train);
    return x;
  }

  Tensor<T> backward(Tensor<T> dy) {
    for (auto it = units.rbegin(); it != units.rend(); ++it)
      dy = it->backward(dy);
    return dy;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) {
    for (size_t i = 0; i < units.size(); ++i)
      units[i].collect(prefix + "/layer" + std::to_string(i), params, buffers);
  }
};

/// The five named blocks. Block b in 1..5 maps to the stem (b=1) or residual
/// stage b-2.
template <typename T>
struct Backbone {
  BackboneSpec spec;
  StemBlock<T> stem;
  std::vector<ResidualStage<T>> stages;

  Backbone() = default;
  explicit Backbone(const BackboneSpec& s) : spec(s) {
    stem = StemBlock<T>(s.input_channels, s.stem_width);
    int in_c = s.stem_width;
    for (int i = 0; i < 4; ++i) {
      const int stride = i == 0 ? 1 : 2;
      stages.emplace_back(in_c, s.stage_widths[i], s.stage_block_counts[i], stride);
      in_c = s.stage_widths[i];
    }
  }

  void init(std::mt19937_64& rng) {
    stem.init(rng);
    for (auto& st : stages) st.init(rng);
  }

  /// Runs blocks [from, to] inclusive, 1-based.
  Tensor<T> forward_blocks(Tensor<T> x, int from, int to, bool train) {
    for (int b = from; b <= to; ++b)
      x = b == 1 ? stem.forward(x, train) : stages[b - 2].forward(x, train);
    return x;
  }

  Tensor<T> backward_blocks(Tensor<T> dy, int from, int to) {
    for (int b = to; b >= from; --b)
      dy = b == 1 ? stem.backward(dy) : stages[b - 2].backward(dy);
    return dy;
  }

  void collect(std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) {
    stem.collect("block1", params, buffers);
    for (int i = 0; i < 4; ++i)
      stages[i].collect("block" + std::to_string(i + 2), params, buffers);
  }
};

}  // namespace mvf
