#pragma once

// Losses, Adam optimization, the training loop, and the finite-difference
// gradient checker. Losses operate on (N, 80, 28) prediction/target tensors
// in normalized units.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pressim/core.hpp"
#include "pressim/nn.hpp"
#include "pressim/rng.hpp"

namespace pressim::nn {

enum class LossMode : std::uint8_t { Mse = 0, Eq4Literal = 1 };

// Sum-of-squares loss over the 2240 cells, averaged over the batch.
template <typename T>
double sum_squared_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.numel() != target.numel())
    throw ShapeMismatch("loss: prediction/target size mismatch");
  const int n = pred.shape[0];
  double total = 0.0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const double d =
        static_cast<double>(pred.v[i]) - static_cast<double>(target.v[i]);
    total += d * d;
  }
  return total / n;
}

// Mean-squared-error variant: the squared-error sum divided by cell count.
template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  const std::size_t cells = pred.numel() / pred.shape[0];
  return sum_squared_loss(pred, target) / static_cast<double>(cells);
}

// d(mse)/d(pred); gradient of the batch-averaged MSE.
template <typename T>
Tensor<T> mse_loss_grad(const Tensor<T>& pred, const Tensor<T>& target) {
  const int n = pred.shape[0];
  const std::size_t cells = pred.numel() / n;
  Tensor<T> g(pred.shape);
  const T scale = static_cast<T>(2.0 / (static_cast<double>(n) * cells));
  for (std::size_t i = 0; i < pred.v.size(); ++i)
    g.v[i] = scale * (pred.v[i] - target.v[i]);
  return g;
}

// Fused-residual loss: sum over cells of (a|p - p_tpn| + b|p - p_tdn|)^2,
// averaged over the batch. As printed it references the two upstream
// residuals, so only the fusion scalars receive gradients.
template <typename T>
double eq4_loss(const Tensor<T>& tpn_pred, const Tensor<T>& tdn_pred,
                const Tensor<T>& target, double alpha, double beta,
                double* dalpha = nullptr, double* dbeta = nullptr) {
  if (tpn_pred.numel() != target.numel() || tdn_pred.numel() != target.numel())
    throw ShapeMismatch("eq4 loss: size mismatch");
  const int n = target.shape[0];
  double total = 0.0, ga = 0.0, gb = 0.0;
  for (std::size_t i = 0; i < target.v.size(); ++i) {
    const double a = std::abs(static_cast<double>(target.v[i]) -
                              static_cast<double>(tpn_pred.v[i]));
    const double b = std::abs(static_cast<double>(target.v[i]) -
                              static_cast<double>(tdn_pred.v[i]));
    const double s = alpha * a + beta * b;
    total += s * s;
    ga += 2.0 * s * a;
    gb += 2.0 * s * b;
  }
  if (dalpha) *dalpha = ga / n;
  if (dbeta) *dbeta = gb / n;
  return total / n;
}

// Mean absolute error between prediction and target tensors (normalized).
template <typename T>
double tensor_mae(const Tensor<T>& pred, const Tensor<T>& target) {
  double total = 0.0;
  for (std::size_t i = 0; i < pred.v.size(); ++i)
    total += std::abs(static_cast<double>(pred.v[i]) -
                      static_cast<double>(target.v[i]));
  return total / pred.v.size();
}

// ---------------------------------------------------------------------------
// Hyperparameters and training state
// ---------------------------------------------------------------------------

struct Hyperparams {
  double learning_rate = 1e-4;
  int batch_size = 128;
  int epochs = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossMode loss_mode = LossMode::Mse;
  double fusion_alpha = 1.0;  // Eq. 4 fusion weights, trainable in that mode
  double fusion_beta = 1.0;
  std::uint64_t seed = 0;     // shuffle/dropout streams
  double early_stop_mse = 0.0;  // stop once train MSE drops below; 0 = off

  void validate() const {
    if (!(learning_rate >= 0.0)) throw InvalidSpec("learning rate must be >= 0");
    if (batch_size < 1) throw InvalidSpec("batch size must be >= 1");
    if (epochs < 0) throw InvalidSpec("epochs must be >= 0");
  }
};

struct EpochStats {
  double train_mse = 0.0;
  double train_mae = 0.0;  // normalized units
  double val_mse = 0.0;
  double val_mae = 0.0;
  bool has_validation = false;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  bool early_stopped = false;
};

// Adam first/second moments, aligned with the network's trainable parameter
// list; carried across resumed runs.
template <typename T>
struct TrainState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::int64_t step = 0;
  int completed_epochs = 0;
  double fusion_alpha = 1.0;
  double fusion_beta = 1.0;
  double fusion_m[2] = {0.0, 0.0};
  double fusion_v[2] = {0.0, 0.0};

  void ensure_shapes(std::vector<ParamRef<T>>& params) {
    std::vector<Tensor<T>*> trainable;
    for (auto& p : params)
      if (p.trainable) trainable.push_back(p.value);
    if (m.size() == trainable.size()) return;
    m.clear();
    v.clear();
    for (auto* t : trainable) {
      m.emplace_back(t->shape);
      v.emplace_back(t->shape);
    }
  }
};

namespace train_detail {

template <typename T>
void adam_step(std::vector<ParamRef<T>>& params, TrainState<T>& state,
               const Hyperparams& hp) {
  ++state.step;
  const double b1 = hp.adam_beta1, b2 = hp.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = hp.learning_rate;
  std::size_t slot = 0;
  for (auto& p : params) {
    if (!p.trainable) continue;
    Tensor<T>& m = state.m[slot];
    Tensor<T>& v = state.v[slot];
    ++slot;
    for (std::size_t i = 0; i < p.value->v.size(); ++i) {
      const double g = static_cast<double>(p.grad->v[i]);
      const double mi = b1 * m.v[i] + (1.0 - b1) * g;
      const double vi = b2 * v.v[i] + (1.0 - b2) * g * g;
      m.v[i] = static_cast<T>(mi);
      v.v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.value->v[i] = static_cast<T>(p.value->v[i] -
                                     lr * mhat / (std::sqrt(vhat) + hp.adam_eps));
    }
  }
}

inline void adam_scalar(double& value, double& m, double& v, double grad,
                        std::int64_t step, const Hyperparams& hp) {
  const double b1 = hp.adam_beta1, b2 = hp.adam_beta2;
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad * grad;
  const double mhat = m / (1.0 - std::pow(b1, static_cast<double>(step)));
  const double vhat = v / (1.0 - std::pow(b2, static_cast<double>(step)));
  value -= hp.learning_rate * mhat / (std::sqrt(vhat) + hp.adam_eps);
}

}  // namespace train_detail

// Batch provider: training code asks for (inputs, targets) tensors for a set
// of window indices. Implementations live in the pipeline layer.
template <typename T>
struct BatchSource {
  virtual ~BatchSource() = default;
  virtual std::size_t size() const = 0;
  virtual Dims input_shape() const = 0;
  // For the Eq. 4 literal mode the "input" must carry the two upstream
  // prediction maps stacked channelwise (the fusion network's input layout).
  virtual void fill(const std::vector<std::size_t>& indices, Tensor<T>& inputs,
                    Tensor<T>& targets) const = 0;
};

// One pass over data in inference mode; returns (mse, mae).
template <typename T>
std::pair<double, double> evaluate(Network<T>& net, const BatchSource<T>& data,
                                   int batch_size) {
  const std::size_t n = data.size();
  double mse_sum = 0.0, mae_sum = 0.0;
  std::size_t seen = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i)
      idx.push_back(i);
    const Dims ds = data.input_shape();
    Tensor<T> inputs({static_cast<int>(idx.size()), ds.c, ds.d, ds.h, ds.w});
    Tensor<T> targets({static_cast<int>(idx.size()), kGridRows, kGridCols});
    data.fill(idx, inputs, targets);
    Tensor<T> pred = net.forward(inputs, /*training=*/false);
    mse_sum += mse_loss(pred, targets) * idx.size();
    mae_sum += tensor_mae(pred, targets) * idx.size();
    seen += idx.size();
  }
  return {mse_sum / seen, mae_sum / seen};
}

// Adam training with per-epoch seeded shuffling. Deterministic given
// (network, data, hyperparameters); resumable via a saved TrainState.
template <typename T>
TrainHistory train(Network<T>& net, const BatchSource<T>& data,
                   const Hyperparams& hp,
                   const BatchSource<T>* validation = nullptr,
                   TrainState<T>* state_io = nullptr) {
  hp.validate();
  if (data.size() == 0) throw EmptyDataset("training dataset is empty");
  if (!(data.input_shape() == net.input_shape))
    throw ShapeMismatch("dataset input " + data.input_shape().str() +
                        " does not match network input " +
                        net.input_shape.str());

  auto params = net.params();
  TrainState<T> local_state;
  TrainState<T>& state = state_io ? *state_io : local_state;
  state.ensure_shapes(params);
  if (state.completed_epochs == 0 && state.step == 0) {
    state.fusion_alpha = hp.fusion_alpha;
    state.fusion_beta = hp.fusion_beta;
  }

  const bool eq4 = hp.loss_mode == LossMode::Eq4Literal;
  if (eq4 && net.kind != NetworkKind::PSN)
    throw InvalidSpec("Eq. 4 literal loss applies to the fusion network only");

  const std::size_t n = data.size();
  TrainHistory history;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const Dims ds = data.input_shape();
  for (int epoch = state.completed_epochs;
       epoch < state.completed_epochs + hp.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(hp.seed, "shuffle", epoch));
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, mae_sum = 0.0;
    std::size_t seen = 0;
    int step_in_epoch = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < n;
         start += hp.batch_size, ++step_in_epoch) {
      idx.assign(order.begin() + start,
                 order.begin() + std::min(n, start + hp.batch_size));
      Tensor<T> inputs({static_cast<int>(idx.size()), ds.c, ds.d, ds.h, ds.w});
      Tensor<T> targets({static_cast<int>(idx.size()), kGridRows, kGridCols});
      data.fill(idx, inputs, targets);

      Rng dropout_rng(derive_seed(hp.seed, "dropout", epoch, step_in_epoch));
      net.zero_grad();
      Tensor<T> pred = net.forward(inputs, /*training=*/true, &dropout_rng);

      double batch_loss;
      if (eq4) {
        // Inputs carry the two upstream prediction maps channelwise.
        Tensor<T> tpn_pred({static_cast<int>(idx.size()), kGridRows, kGridCols});
        Tensor<T> tdn_pred(tpn_pred.shape);
        const std::size_t plane = kGridCells;
        for (std::size_t s = 0; s < idx.size(); ++s) {
          const T* base = inputs.data() + s * 2 * plane;
          std::copy(base, base + plane, tpn_pred.data() + s * plane);
          std::copy(base + plane, base + 2 * plane,
                    tdn_pred.data() + s * plane);
        }
        double da = 0.0, db = 0.0;
        batch_loss = eq4_loss(tpn_pred, tdn_pred, targets, state.fusion_alpha,
                              state.fusion_beta, &da, &db);
        ++state.step;
        train_detail::adam_scalar(state.fusion_alpha, state.fusion_m[0],
                                  state.fusion_v[0], da, state.step, hp);
        train_detail::adam_scalar(state.fusion_beta, state.fusion_m[1],
                                  state.fusion_v[1], db, state.step, hp);
        mae_sum += tensor_mae(pred, targets) * idx.size();
      } else {
        batch_loss = mse_loss(pred, targets);
        mae_sum += tensor_mae(pred, targets) * idx.size();
        Tensor<T> grad = mse_loss_grad(pred, targets);
        net.backward(std::move(grad));
        train_detail::adam_step(params, state, hp);
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceDetected("loss became non-finite at epoch " +
                                 std::to_string(epoch));
      loss_sum += batch_loss * idx.size();
      seen += idx.size();
    }

    EpochStats stats;
    stats.train_mse = loss_sum / seen;
    stats.train_mae = mae_sum / seen;
    if (validation && validation->size() > 0) {
      auto [vmse, vmae] = evaluate(net, *validation, hp.batch_size);
      stats.val_mse = vmse;
      stats.val_mae = vmae;
      stats.has_validation = true;
    }
    history.epochs.push_back(stats);
    state.completed_epochs = epoch + 1;

    if (hp.early_stop_mse > 0.0 && stats.train_mse < hp.early_stop_mse) {
      history.early_stopped = true;
      break;
    }
  }
  net.release_activations();
  return history;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::map<std::string, double> per_layer_type;
  std::size_t checked = 0;
};

// Central finite differences against analytic gradients on a random
// subsample of parameters per layer type. Run with T = double and dropout
// disabled. Relative error: |ga - gn| / max(1e-8, |ga| + |gn|).
template <typename T>
GradCheckReport grad_check(Network<T>& net, const Tensor<T>& sample,
                           const Tensor<T>& target, std::size_t per_type = 200,
                           double step = 1e-5, std::uint64_t seed = 12345) {
  static_assert(std::is_same_v<T, double>,
                "gradient checks require 64-bit precision");
  auto params = net.params();

  auto loss_of = [&]() {
    Tensor<T> pred = net.forward(sample, /*training=*/true, nullptr,
                                 /*dropout_enabled=*/false);
    return mse_loss(pred, target);
  };

  // Analytic gradients.
  net.zero_grad();
  {
    Tensor<T> pred = net.forward(sample, /*training=*/true, nullptr, false);
    net.backward(mse_loss_grad(pred, target));
  }
  std::vector<Tensor<T>> analytic;
  for (auto& p : params)
    analytic.push_back(p.grad ? *p.grad : Tensor<T>{});

  // Group trainable parameter tensors by layer type (name prefix l##.type).
  std::map<std::string, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    const std::string& name = params[i].name;
    const auto dot = name.find('.');
    const auto dot2 = name.find('.', dot + 1);
    by_type[name.substr(dot + 1, dot2 - dot - 1)].push_back(i);
  }

  GradCheckReport report;
  Rng rng(seed);
  for (auto& [type, tensors] : by_type) {
    std::size_t total = 0;
    for (std::size_t ti : tensors) total += params[ti].value->numel();
    const std::size_t want = std::min(per_type, total);
    double type_max = 0.0;
    for (std::size_t k = 0; k < want; ++k) {
      // Pick a tensor weighted by size, then an element within it.
      std::size_t pick = rng.next_below(total);
      std::size_t ti = 0;
      for (std::size_t t : tensors) {
        const std::size_t sz = params[t].value->numel();
        if (pick < sz) {
          ti = t;
          break;
        }
        pick -= sz;
      }
      T& w = params[ti].value->v[pick];
      const T saved = w;
      w = saved + static_cast<T>(step);
      const double up = loss_of();
      w = saved - static_cast<T>(step);
      const double down = loss_of();
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double exact = static_cast<double>(analytic[ti].v[pick]);
      const double rel = std::abs(exact - numeric) /
                         std::max(1e-8, std::abs(exact) + std::abs(numeric));
      type_max = std::max(type_max, rel);
      ++report.checked;
    }
    report.per_layer_type[type] = type_max;
    report.max_rel_error = std::max(report.max_rel_error, type_max);
  }
  net.release_activations();
  return report;
}

}  // namespace pressim::nn
