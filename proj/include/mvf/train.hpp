#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mvf/data.hpp"
#include "mvf/loss.hpp"
#include "mvf/metrics.hpp"
#include "mvf/model.hpp"

namespace mvf {

struct TrainConfig {
  int epochs = 30;
  double lr0 = 1e-3;
  double decay_factor = 0.1;
  std::vector<int> decay_epochs = {10, 20};
  double momentum = 0.9;
  int batch_cases = 16;  // 2 views each, 32 images per full batch
  int image_size = 64;
  uint64_t seed = 1;
  FocalLossParams loss;
  bool alpha_auto = true;  // alpha from normalized inverse train class frequency

  /// 200 epochs, decay after 20/40/60/80, 800-px inputs.
  static TrainConfig paper_preset() {
    TrainConfig c;
    c.epochs = 200;
    c.decay_epochs = {20, 40, 60, 80};
    c.image_size = 800;
    return c;
  }

  /// Same structure scaled down for desk-scale runs.
  static TrainConfig desk_preset() { return TrainConfig{}; }

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(lr0 >= 0.0)) throw ConfigError("train.lr0 must be >= 0");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0))
      throw ConfigError("train.decay_factor must lie in (0, 1]");
    for (size_t i = 1; i < decay_epochs.size(); ++i)
      if (decay_epochs[i] <= decay_epochs[i - 1])
        throw ConfigError("train.decay_epochs must be strictly increasing");
    if (batch_cases < 1) throw ConfigError("train.batch_cases must be >= 1");
    if (image_size < 8) throw ConfigError("train.image_size must be >= 8");
    loss.validate();
  }
};

/// Step-decayed rate: decaying "after epoch N" takes effect from epoch N+1.
inline double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 1) throw UsageError("lr_at: epoch must be >= 1");
  int decays = 0;
  for (int d : cfg.decay_epochs)
    if (d < epoch) ++decays;
  return cfg.lr0 * std::pow(cfg.decay_factor, decays);
}

/// Heavy-ball SGD: v <- momentum*v + g; w <- w - lr*v.
template <typename T>
struct SgdMomentum {
  double momentum = 0.9;
  std::vector<Tensor<T>> velocity;

  void step(std::vector<ParamRef<T>>& params, double lr) {
    if (velocity.empty()) {
      velocity.reserve(params.size());
      for (auto& p : params)
        velocity.emplace_back(p.value->n, p.value->c, p.value->h, p.value->w);
    }
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& v = velocity[i];
      const Tensor<T>& g = *params[i].grad;
      Tensor<T>& w = *params[i].value;
      for (size_t j = 0; j < v.size(); ++j) {
        v.data[j] = static_cast<T>(momentum * v.data[j] + g.data[j]);
        w.data[j] -= static_cast<T>(lr * v.data[j]);
      }
    }
  }
};

template <typename T>
struct StateSnapshot {
  std::vector<Tensor<T>> params, buffers;
};

template <typename T>
StateSnapshot<T> take_snapshot(FusionModel<T>& model) {
  StateSnapshot<T> s;
  for (auto& p : model.parameters()) s.params.push_back(*p.value);
  for (auto& b : model.buffers()) s.buffers.push_back(*b.value);
  return s;
}

template <typename T>
void restore_snapshot(FusionModel<T>& model, const StateSnapshot<T>& s) {
  auto params = model.parameters();
  auto buffers = model.buffers();
  for (size_t i = 0; i < params.size(); ++i) *params[i].value = s.params[i];
  for (size_t i = 0; i < buffers.size(); ++i) *buffers[i].value = s.buffers[i];
}

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  MetricsReport eval;
  double wall_time_s = 0.0;  // in-memory only; excluded from history.jsonl
};

struct TrainingHistory {
  std::vector<EpochRecord> records;
  int best_epoch = 0;
  double best_macro_f1 = -1.0;
};

/// One prediction per case, frozen weights, eval-mode normalization.
inline MetricsReport evaluate(FusionModel<float>& model,
                              const std::vector<PreparedCase>& cases,
                              int batch_cases = 16) {
  if (cases.empty()) throw UsageError("evaluate: empty dataset");
  std::vector<int> predictions, labels;
  std::vector<double> scores;
  const auto batches =
      make_batches(static_cast<int>(cases.size()), batch_cases, 0, false);
  for (const auto& batch : batches) {
    const BatchTensors bt = assemble_batch(cases, batch);
    const Tensor<float> logits = model.forward(bt.examined, bt.auxiliary, false);
    for (int ni = 0; ni < logits.n; ++ni) {
      const double z0 = logits.at(ni, 0, 0, 0);
      const double z1 = logits.at(ni, 1, 0, 0);
      predictions.push_back(z1 > z0 ? 1 : 0);
      scores.push_back(1.0 / (1.0 + std::exp(z0 - z1)));  // softmax[1]
      labels.push_back(bt.labels[ni]);
    }
  }
  return build_report(predictions, scores, labels);
}

struct TrainResult {
  TrainingHistory history;
  StateSnapshot<float> best_state;
  MetricsReport best_metrics;
  MetricsReport final_metrics;
};

inline std::vector<double> auto_alpha(const std::vector<PreparedCase>& train) {
  long n[2] = {0, 0};
  for (const auto& c : train) ++n[c.label];
  if (n[0] == 0 || n[1] == 0)
    throw UsageError("auto alpha needs both classes in the training split");
  const double inv0 = 1.0 / n[0], inv1 = 1.0 / n[1];
  return {inv0 / (inv0 + inv1), inv1 / (inv0 + inv1)};
}

/// The training protocol: shuffled case batches, two-view forward, focal
/// loss, SGD-with-momentum updates, per-epoch test-split evaluation, best
/// macro-F1 snapshot. Bit-reproducible for a fixed (seed, config, dataset).
inline TrainResult train_model(FusionModel<float>& model,
                               const PreparedDataset& ds,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (ds.train.empty() || ds.test.empty())
    throw UsageError("train_model: dataset has an empty split");
  FocalLossParams loss = cfg.loss;
  if (cfg.alpha_auto) loss.alpha = auto_alpha(ds.train);

  TrainResult result;
  SgdMomentum<float> sgd{cfg.momentum, {}};
  auto params = model.parameters();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);
    const auto batches = make_batches(static_cast<int>(ds.train.size()),
                                      cfg.batch_cases,
                                      epoch_seed(cfg.seed, epoch), true);
    double loss_sum = 0.0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const BatchTensors bt = assemble_batch(ds.train, batches[bi]);
      model.zero_grad();
      const Tensor<float> logits = model.forward(bt.examined, bt.auxiliary, true);
      bool finite = true;
      for (const float z : logits.data) finite = finite && std::isfinite(z);
      if (!finite)
        throw std::runtime_error("non-finite training loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(bi));
      auto [batch_loss, dlogits] = focal_loss_batch(logits, bt.labels, loss);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("non-finite training loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(bi));
      model.backward(dlogits);
      sgd.step(params, lr);
      loss_sum += batch_loss * static_cast<double>(batches[bi].size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(ds.train.size());
    rec.eval = evaluate(model, ds.test, cfg.batch_cases);
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (rec.eval.macro_f1 > result.history.best_macro_f1) {
      result.history.best_macro_f1 = rec.eval.macro_f1;
      result.history.best_epoch = epoch;
      result.best_state = take_snapshot(model);
      result.best_metrics = rec.eval;
    }
    result.final_metrics = rec.eval;
    result.history.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace mvf
