#pragma once

// Orchestration shared by the CLI and the test suites: batch sources feeding
// networks from windowed datasets, the two-stage training schedule, pressure
// map synthesis, and timestamp-joined evaluation.

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pressim/checkpoint.hpp"
#include "pressim/dataset.hpp"
#include "pressim/metrics.hpp"
#include "pressim/motion.hpp"
#include "pressim/nn.hpp"
#include "pressim/nn_train.hpp"
#include "pressim/sim.hpp"

namespace pressim::pipeline {

// ---------------------------------------------------------------------------
// Batch sources
// ---------------------------------------------------------------------------

template <typename T>
class PoseBatchSource final : public nn::BatchSource<T> {
 public:
  PoseBatchSource(const WindowedDataset& ds, std::vector<std::size_t> indices,
                  NormalizationConstants norm = {})
      : ds_(&ds), indices_(std::move(indices)), norm_(norm) {}

  std::size_t size() const override { return indices_.size(); }
  nn::Dims input_shape() const override {
    return {1, ds_->width, ds_->joint_count, 3};
  }
  void fill(const std::vector<std::size_t>& idx, nn::Tensor<T>& inputs,
            nn::Tensor<T>& targets) const override {
    const double ps = norm_.pose_scale;
    const double rs = norm_.pressure_scale;
    std::size_t o = 0, to = 0;
    for (std::size_t s : idx) {
      const WindowRef ref = ds_->windows[indices_[s]];
      for (int k = 0; k < ds_->width; ++k) {
        const AlignedEntry& e = ds_->entry(ref, k);
        for (const Vec3& j : e.pose) {
          inputs.v[o++] = static_cast<T>(j.x / ps);
          inputs.v[o++] = static_cast<T>(j.y / ps);
          inputs.v[o++] = static_cast<T>(j.z / ps);
        }
      }
      const AlignedEntry& last = ds_->entry(ref, ds_->width - 1);
      for (int i = 0; i < kGridCells; ++i)
        targets.v[to++] = static_cast<T>(last.pressure.values[i] / rs);
    }
  }

 private:
  const WindowedDataset* ds_;
  std::vector<std::size_t> indices_;
  NormalizationConstants norm_;
};

template <typename T>
class DeformBatchSource final : public nn::BatchSource<T> {
 public:
  DeformBatchSource(const WindowedDataset& ds,
                    std::vector<std::size_t> indices,
                    NormalizationConstants norm = {})
      : ds_(&ds), indices_(std::move(indices)), norm_(norm) {}

  std::size_t size() const override { return indices_.size(); }
  nn::Dims input_shape() const override {
    return {1, ds_->width, kGridRows, kGridCols};
  }
  void fill(const std::vector<std::size_t>& idx, nn::Tensor<T>& inputs,
            nn::Tensor<T>& targets) const override {
    const double dsc = norm_.deform_scale;
    const double rs = norm_.pressure_scale;
    std::size_t o = 0, to = 0;
    for (std::size_t s : idx) {
      const WindowRef ref = ds_->windows[indices_[s]];
      for (int k = 0; k < ds_->width; ++k) {
        const AlignedEntry& e = ds_->entry(ref, k);
        for (int i = 0; i < kGridCells; ++i)
          inputs.v[o++] = static_cast<T>(e.deform.values[i] / dsc);
      }
      const AlignedEntry& last = ds_->entry(ref, ds_->width - 1);
      for (int i = 0; i < kGridCells; ++i)
        targets.v[to++] = static_cast<T>(last.pressure.values[i] / rs);
    }
  }

 private:
  const WindowedDataset* ds_;
  std::vector<std::size_t> indices_;
  NormalizationConstants norm_;
};

// Precomputed upstream predictions (channel 0: pose network, channel 1:
// deformation network), stacked per window.
template <typename T>
class PsnBatchSource final : public nn::BatchSource<T> {
 public:
  PsnBatchSource(std::shared_ptr<const std::vector<T>> stacked,
                 const WindowedDataset& ds, std::vector<std::size_t> indices,
                 NormalizationConstants norm = {})
      : stacked_(std::move(stacked)), ds_(&ds), indices_(std::move(indices)),
        norm_(norm) {}

  std::size_t size() const override { return indices_.size(); }
  nn::Dims input_shape() const override { return {2, 1, kGridRows, kGridCols}; }
  void fill(const std::vector<std::size_t>& idx, nn::Tensor<T>& inputs,
            nn::Tensor<T>& targets) const override {
    const std::size_t per = 2 * static_cast<std::size_t>(kGridCells);
    const double rs = norm_.pressure_scale;
    std::size_t o = 0, to = 0;
    for (std::size_t s : idx) {
      const std::size_t w = indices_[s];
      std::copy(stacked_->begin() + w * per, stacked_->begin() + (w + 1) * per,
                inputs.v.begin() + o);
      o += per;
      const AlignedEntry& last = ds_->target_entry(w);
      for (int i = 0; i < kGridCells; ++i)
        targets.v[to++] = static_cast<T>(last.pressure.values[i] / rs);
    }
  }

 private:
  std::shared_ptr<const std::vector<T>> stacked_;
  const WindowedDataset* ds_;
  std::vector<std::size_t> indices_;
  NormalizationConstants norm_;
};

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Runs both upstream networks in inference mode over every window and stacks
// their prediction maps channelwise.
template <typename T>
std::shared_ptr<std::vector<T>> stack_upstream_predictions(
    nn::Network<T>& tpn, nn::Network<T>& tdn, const WindowedDataset& ds,
    int batch_size = 128) {
  const std::size_t n = ds.size();
  const std::size_t per = 2 * static_cast<std::size_t>(kGridCells);
  auto stacked = std::make_shared<std::vector<T>>(n * per);
  PoseBatchSource<T> pose_src(ds, all_indices(n));
  DeformBatchSource<T> deform_src(ds, all_indices(n));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n;
       start += static_cast<std::size_t>(batch_size)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i)
      idx.push_back(i);
    const int m = static_cast<int>(idx.size());
    nn::Dims pd = pose_src.input_shape();
    nn::Dims dd = deform_src.input_shape();
    nn::Tensor<T> pose_in({m, pd.c, pd.d, pd.h, pd.w});
    nn::Tensor<T> deform_in({m, dd.c, dd.d, dd.h, dd.w});
    nn::Tensor<T> targets({m, kGridRows, kGridCols});
    pose_src.fill(idx, pose_in, targets);
    deform_src.fill(idx, deform_in, targets);
    nn::Tensor<T> tp = tpn.forward(pose_in, false);
    nn::Tensor<T> td = tdn.forward(deform_in, false);
    for (int s = 0; s < m; ++s) {
      T* dst = stacked->data() + (start + s) * per;
      std::copy(tp.data() + s * kGridCells, tp.data() + (s + 1) * kGridCells,
                dst);
      std::copy(td.data() + s * kGridCells, td.data() + (s + 1) * kGridCells,
                dst + kGridCells);
    }
  }
  tpn.release_activations();
  tdn.release_activations();
  return stacked;
}

// Denormalizes one prediction row to mmHg: values below the floor collapse
// to exact zero, the rest clip to the measuring range.
template <typename T>
PressureFrame to_pressure_frame(const T* row, double zero_floor_mmhg,
                                double pressure_scale = kPressureMaxMmHg) {
  PressureFrame f{};
  for (int i = 0; i < kGridCells; ++i) {
    double v = static_cast<double>(row[i]) * pressure_scale;
    if (v < zero_floor_mmhg) v = 0.0;
    f.values[i] = static_cast<float>(std::min(v, kPressureMaxMmHg));
  }
  return f;
}

// Inference over a batch source; returns denormalized pressure frames in
// source order.
template <typename T>
std::vector<PressureFrame> predict_frames(nn::Network<T>& net,
                                          const nn::BatchSource<T>& src,
                                          int batch_size,
                                          double zero_floor_mmhg) {
  std::vector<PressureFrame> out;
  const std::size_t n = src.size();
  out.reserve(n);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n;
       start += static_cast<std::size_t>(batch_size)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i)
      idx.push_back(i);
    const int m = static_cast<int>(idx.size());
    nn::Dims ds = src.input_shape();
    nn::Tensor<T> inputs({m, ds.c, ds.d, ds.h, ds.w});
    nn::Tensor<T> targets({m, kGridRows, kGridCols});
    src.fill(idx, inputs, targets);
    nn::Tensor<T> pred = net.forward(inputs, false);
    for (int s = 0; s < m; ++s)
      out.push_back(to_pressure_frame(pred.data() + s * kGridCells,
                                      zero_floor_mmhg));
  }
  net.release_activations();
  return out;
}

// Ground-truth pressure frames for a window index list.
inline std::vector<PressureFrame> collect_targets(
    const WindowedDataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<PressureFrame> out;
  out.reserve(indices.size());
  for (std::size_t w : indices) out.push_back(ds.target_entry(w).pressure);
  return out;
}

// ---------------------------------------------------------------------------
// Training schedule
// ---------------------------------------------------------------------------

struct TrainBudgets {
  int tpn = 10;
  int tdn = 10;
  int psn = 10;
  int baseline = 30;  // pose-only model gets the stack's combined budget
  int finetune = 0;
};

template <typename T>
struct TrainedStack {
  nn::Network<T> tpn;
  nn::Network<T> tdn;
  nn::Network<T> psn;
  nn::TrainState<T> tpn_state, tdn_state, psn_state;
  nn::TrainHistory tpn_history, tdn_history, psn_history;
};

template <typename T>
void finetune_stack(TrainedStack<T>& stack, const WindowedDataset& ds,
                    const std::vector<std::size_t>& train_idx,
                    nn::Hyperparams hp, int epochs);

// Two-stage schedule: the pose and deformation networks train independently
// against normalized pressure targets, then freeze while the fusion network
// trains on their stacked outputs.
template <typename T>
TrainedStack<T> train_pressim_stack(const WindowedDataset& ds,
                                    const std::vector<std::size_t>& train_idx,
                                    const std::vector<std::size_t>& val_idx,
                                    nn::Hyperparams hp,
                                    const TrainBudgets& budgets,
                                    std::uint64_t model_seed) {
  TrainedStack<T> stack;
  stack.tpn = nn::build_model<T>(nn::NetworkKind::TPN, model_seed);
  stack.tdn = nn::build_model<T>(nn::NetworkKind::TDN,
                                 derive_seed(model_seed, "tdn"));
  stack.psn = nn::build_model<T>(nn::NetworkKind::PSN,
                                 derive_seed(model_seed, "psn"));

  PoseBatchSource<T> pose_train(ds, train_idx);
  PoseBatchSource<T> pose_val(ds, val_idx);
  DeformBatchSource<T> deform_train(ds, train_idx);
  DeformBatchSource<T> deform_val(ds, val_idx);

  nn::Hyperparams hp_tpn = hp;
  hp_tpn.epochs = budgets.tpn;
  hp_tpn.seed = derive_seed(hp.seed, "train-tpn");
  stack.tpn_history = nn::train(stack.tpn, pose_train, hp_tpn,
                                val_idx.empty() ? nullptr : &pose_val,
                                &stack.tpn_state);

  nn::Hyperparams hp_tdn = hp;
  hp_tdn.epochs = budgets.tdn;
  hp_tdn.seed = derive_seed(hp.seed, "train-tdn");
  stack.tdn_history = nn::train(stack.tdn, deform_train, hp_tdn,
                                val_idx.empty() ? nullptr : &deform_val,
                                &stack.tdn_state);

  auto stacked = stack_upstream_predictions(stack.tpn, stack.tdn, ds,
                                            hp.batch_size);
  PsnBatchSource<T> psn_train(stacked, ds, train_idx);
  PsnBatchSource<T> psn_val(stacked, ds, val_idx);
  nn::Hyperparams hp_psn = hp;
  hp_psn.epochs = budgets.psn;
  hp_psn.seed = derive_seed(hp.seed, "train-psn");
  stack.psn_history = nn::train(stack.psn, psn_train, hp_psn,
                                val_idx.empty() ? nullptr : &psn_val,
                                &stack.psn_state);

  if (budgets.finetune > 0)
    finetune_stack(stack, ds, train_idx, hp, budgets.finetune);
  return stack;
}

// Optional joint fine-tuning: gradients flow from the fusion loss through
// the fusion network into both upstream networks.
template <typename T>
void finetune_stack(TrainedStack<T>& stack, const WindowedDataset& ds,
                    const std::vector<std::size_t>& train_idx,
                    nn::Hyperparams hp, int epochs) {
  PoseBatchSource<T> pose_src(ds, train_idx);
  DeformBatchSource<T> deform_src(ds, train_idx);
  auto tpn_params = stack.tpn.params();
  auto tdn_params = stack.tdn.params();
  auto psn_params = stack.psn.params();
  nn::TrainState<T> s_tpn, s_tdn, s_psn;
  s_tpn.ensure_shapes(tpn_params);
  s_tdn.ensure_shapes(tdn_params);
  s_psn.ensure_shapes(psn_params);

  const std::size_t n = train_idx.size();
  std::vector<std::size_t> order(n);
  const std::uint64_t seed = derive_seed(hp.seed, "finetune");
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, "shuffle", epoch));
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_rng.shuffle(order);
    int step = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < n; start += hp.batch_size, ++step) {
      idx.assign(order.begin() + start,
                 order.begin() + std::min(n, start + hp.batch_size));
      const int m = static_cast<int>(idx.size());
      nn::Dims pd = pose_src.input_shape();
      nn::Dims dd = deform_src.input_shape();
      nn::Tensor<T> pose_in({m, pd.c, pd.d, pd.h, pd.w});
      nn::Tensor<T> deform_in({m, dd.c, dd.d, dd.h, dd.w});
      nn::Tensor<T> targets({m, kGridRows, kGridCols});
      pose_src.fill(idx, pose_in, targets);
      deform_src.fill(idx, deform_in, targets);

      Rng rng(derive_seed(seed, "dropout", epoch, step));
      stack.tpn.zero_grad();
      stack.tdn.zero_grad();
      stack.psn.zero_grad();
      nn::Tensor<T> tp = stack.tpn.forward(pose_in, true, &rng);
      nn::Tensor<T> td = stack.tdn.forward(deform_in, true, &rng);
      nn::Tensor<T> psn_in({m, 2, 1, kGridRows, kGridCols});
      for (int s = 0; s < m; ++s) {
        std::copy(tp.data() + s * kGridCells, tp.data() + (s + 1) * kGridCells,
                  psn_in.data() + s * 2 * kGridCells);
        std::copy(td.data() + s * kGridCells, td.data() + (s + 1) * kGridCells,
                  psn_in.data() + (s * 2 + 1) * kGridCells);
      }
      nn::Tensor<T> pred = stack.psn.forward(psn_in, true, &rng);
      const double loss = nn::mse_loss(pred, targets);
      if (!std::isfinite(loss))
        throw DivergenceDetected("fine-tune loss became non-finite at epoch " +
                                 std::to_string(epoch));
      nn::Tensor<T> dpsn_in = stack.psn.backward(nn::mse_loss_grad(pred, targets));
      nn::Tensor<T> dtp({m, kGridRows, kGridCols});
      nn::Tensor<T> dtd({m, kGridRows, kGridCols});
      for (int s = 0; s < m; ++s) {
        std::copy(dpsn_in.data() + s * 2 * kGridCells,
                  dpsn_in.data() + (s * 2 + 1) * kGridCells,
                  dtp.data() + s * kGridCells);
        std::copy(dpsn_in.data() + (s * 2 + 1) * kGridCells,
                  dpsn_in.data() + (s + 1) * 2 * kGridCells,
                  dtd.data() + s * kGridCells);
      }
      stack.tpn.backward(std::move(dtp));
      stack.tdn.backward(std::move(dtd));
      nn::train_detail::adam_step(psn_params, s_psn, hp);
      nn::train_detail::adam_step(tpn_params, s_tpn, hp);
      nn::train_detail::adam_step(tdn_params, s_tdn, hp);
    }
  }
  stack.tpn.release_activations();
  stack.tdn.release_activations();
  stack.psn.release_activations();
}

// Synthesized pressure for a window index list via the full stack.
template <typename T>
std::vector<PressureFrame> synthesize_stack(TrainedStack<T>& stack,
                                            const WindowedDataset& ds,
                                            const std::vector<std::size_t>& idx,
                                            int batch_size,
                                            double zero_floor_mmhg) {
  auto stacked = stack_upstream_predictions(stack.tpn, stack.tdn, ds,
                                            batch_size);
  PsnBatchSource<T> src(stacked, ds, idx);
  return predict_frames(stack.psn, src, batch_size, zero_floor_mmhg);
}

// ---------------------------------------------------------------------------
// Synthesis from files (no ground-truth pressure stream)
// ---------------------------------------------------------------------------

// Aligns a pose stream to the deformation clock with placeholder pressure
// frames, for synthesis where no sensor ground truth exists.
inline AlignedDataset align_for_synth(const PoseSequence& poses,
                                      const std::vector<DeformationFrame>& deforms,
                                      const std::vector<double>& deform_ts,
                                      const SubjectProfile& subject,
                                      double tolerance = kAlignToleranceDefault) {
  std::vector<PressureFrame> placeholder(deforms.size());
  return align_streams(poses, deforms, deform_ts, placeholder, deform_ts,
                       subject, tolerance);
}

struct SynthResult {
  std::vector<PressureFrame> frames;
  std::vector<double> timestamps;  // target (last window frame) timestamps
};

template <typename T>
SynthResult synthesize_from_streams(nn::Network<T>& tpn, nn::Network<T>& tdn,
                                    nn::Network<T>& psn,
                                    const PoseSequence& poses,
                                    const std::vector<DeformationFrame>& deforms,
                                    const std::vector<double>& deform_ts,
                                    const SubjectProfile& subject,
                                    double tolerance, int batch_size,
                                    double zero_floor_mmhg) {
  AlignedDataset aligned =
      align_for_synth(poses, deforms, deform_ts, subject, tolerance);
  WindowedDataset ds = make_windows(std::move(aligned));
  auto stacked = stack_upstream_predictions(tpn, tdn, ds, batch_size);
  PsnBatchSource<T> src(stacked, ds, all_indices(ds.size()));
  SynthResult result;
  result.frames = predict_frames(psn, src, batch_size, zero_floor_mmhg);
  result.timestamps.reserve(ds.size());
  for (std::size_t w = 0; w < ds.size(); ++w)
    result.timestamps.push_back(ds.target_entry(w).timestamp);
  return result;
}

template <typename T>
SynthResult synthesize_baseline(nn::Network<T>& baseline,
                                const PoseSequence& poses,
                                const std::vector<DeformationFrame>& deforms,
                                const std::vector<double>& deform_ts,
                                const SubjectProfile& subject, double tolerance,
                                int batch_size, double zero_floor_mmhg) {
  AlignedDataset aligned =
      align_for_synth(poses, deforms, deform_ts, subject, tolerance);
  WindowedDataset ds = make_windows(std::move(aligned));
  PoseBatchSource<T> src(ds, all_indices(ds.size()));
  SynthResult result;
  result.frames = predict_frames(baseline, src, batch_size, zero_floor_mmhg);
  result.timestamps.reserve(ds.size());
  for (std::size_t w = 0; w < ds.size(); ++w)
    result.timestamps.push_back(ds.target_entry(w).timestamp);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation joins
// ---------------------------------------------------------------------------

// Pairs prediction frames with ground-truth frames carrying (near-)identical
// timestamps; predictions are expected to be a subset of the ground truth.
inline std::pair<std::vector<PressureFrame>, std::vector<PressureFrame>>
join_by_timestamp(const std::vector<PressureFrame>& pred,
                  const std::vector<double>& pred_ts,
                  const std::vector<PressureFrame>& gt,
                  const std::vector<double>& gt_ts, double tolerance = 1e-9) {
  std::pair<std::vector<PressureFrame>, std::vector<PressureFrame>> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int j = align_detail::nearest_index(gt_ts, pred_ts[i]);
    if (std::abs(gt_ts[j] - pred_ts[i]) > tolerance)
      throw LengthMismatch("no ground-truth frame at timestamp " +
                           std::to_string(pred_ts[i]));
    out.first.push_back(pred[i]);
    out.second.push_back(gt[j]);
  }
  if (out.first.empty()) throw LengthMismatch("no overlapping frames to score");
  return out;
}

// History CSV: one row per epoch, MAE converted to mmHg.
inline std::string history_csv(const nn::TrainHistory& history) {
  std::string out = "epoch,train_mse,train_mae_mmhg,val_mse,val_mae_mmhg\n";
  char line[160];
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const auto& s = history.epochs[e];
    if (s.has_validation)
      std::snprintf(line, sizeof(line), "%zu,%.8g,%.6g,%.8g,%.6g\n", e,
                    s.train_mse, s.train_mae * kPressureMaxMmHg, s.val_mse,
                    s.val_mae * kPressureMaxMmHg);
    else
      std::snprintf(line, sizeof(line), "%zu,%.8g,%.6g,,\n", e, s.train_mse,
                    s.train_mae * kPressureMaxMmHg);
    out += line;
  }
  return out;
}

}  // namespace pressim::pipeline
