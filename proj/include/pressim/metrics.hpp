#pragma once

// Evaluation protocol: MAE over the full grid, binarized R^2 for shape
// agreement, RMSD restricted to the ground-truth contact mask, and the
// corrected R^2 derived from that masked RMSD. All metrics are computed per
// frame in double precision and averaged over frames; degenerate frames
// (empty mask, zero variance) are skipped and counted, never averaged in.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "pressim/core.hpp"

namespace pressim {

template <typename A, typename B>
inline void check_lengths(const std::vector<Grid<A>>& pred,
                          const std::vector<Grid<B>>& gt,
                          const char* metric) {
  if (pred.size() != gt.size())
    throw LengthMismatch(std::string(metric) + ": prediction has " +
                         std::to_string(pred.size()) + " frames, ground truth " +
                         std::to_string(gt.size()));
  if (pred.empty())
    throw LengthMismatch(std::string(metric) + ": empty sequences");
}

// Mean absolute error over all frames and cells, in the grids' units.
template <typename A, typename B>
inline double mae(const std::vector<Grid<A>>& pred,
                  const std::vector<Grid<B>>& gt) {
  check_lengths(pred, gt, "mae");
  double sum = 0.0;
  for (std::size_t f = 0; f < gt.size(); ++f)
    for (int i = 0; i < kGridCells; ++i)
      sum += std::abs(static_cast<double>(pred[f].values[i]) -
                      static_cast<double>(gt[f].values[i]));
  return sum / (static_cast<double>(gt.size()) * kGridCells);
}

// 1 where value > 0, else 0.
template <typename T>
inline Grid<std::uint8_t> binarize(const Grid<T>& frame) {
  Grid<std::uint8_t> out{};
  for (int i = 0; i < kGridCells; ++i)
    out.values[i] = frame.values[i] > 0 ? 1 : 0;
  return out;
}

// Single-frame R^2 about the ground-truth mean over n cells. A frame with
// zero total variance scores 1 when matched exactly, 0 otherwise.
inline double r_squared_cells(const double* pred, const double* gt,
                              std::size_t n) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += gt[i];
  mean /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ss_res += (gt[i] - pred[i]) * (gt[i] - pred[i]);
    ss_tot += (gt[i] - mean) * (gt[i] - mean);
  }
  if (ss_tot > 0.0) return 1.0 - ss_res / ss_tot;
  return ss_res == 0.0 ? 1.0 : 0.0;
}

// Per-frame R^2 averaged over frames.
template <typename A, typename B>
inline double r_squared(const std::vector<Grid<A>>& pred,
                        const std::vector<Grid<B>>& gt) {
  check_lengths(pred, gt, "r_squared");
  double total = 0.0;
  std::array<double, kGridCells> p{}, g{};
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (int i = 0; i < kGridCells; ++i) {
      p[i] = static_cast<double>(pred[f].values[i]);
      g[i] = static_cast<double>(gt[f].values[i]);
    }
    total += r_squared_cells(p.data(), g.data(), kGridCells);
  }
  return total / static_cast<double>(gt.size());
}

// Binarized shape-agreement score: both sequences thresholded at > 0 first.
template <typename A, typename B>
inline double binarized_r_squared(const std::vector<Grid<A>>& pred,
                                  const std::vector<Grid<B>>& gt) {
  check_lengths(pred, gt, "binarized_r_squared");
  std::vector<Grid<std::uint8_t>> bp, bg;
  bp.reserve(pred.size());
  bg.reserve(gt.size());
  for (const auto& f : pred) bp.push_back(binarize(f));
  for (const auto& f : gt) bg.push_back(binarize(f));
  return r_squared(bp, bg);
}

struct ContactMask {
  std::vector<std::pair<int, int>> indices;  // (row, col), row-major order
  std::size_t frame = 0;

  std::size_t size() const { return indices.size(); }
};

template <typename T>
inline ContactMask contact_mask(const Grid<T>& gt, std::size_t frame = 0) {
  ContactMask mask;
  mask.frame = frame;
  for (int r = 0; r < kGridRows; ++r)
    for (int c = 0; c < kGridCols; ++c)
      if (gt(r, c) > 0) mask.indices.emplace_back(r, c);
  return mask;
}

// Mean over frames of the per-frame RMSD restricted to the ground-truth
// contact mask; frames with empty masks are skipped.
template <typename A, typename B>
inline double mask_rmsd(const std::vector<Grid<A>>& pred,
                        const std::vector<Grid<B>>& gt,
                        std::size_t* skipped = nullptr) {
  check_lengths(pred, gt, "mask_rmsd");
  double total = 0.0;
  std::size_t used = 0, empty = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    double sq = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < kGridCells; ++i) {
      if (!(gt[f].values[i] > 0)) continue;
      const double d = static_cast<double>(pred[f].values[i]) -
                       static_cast<double>(gt[f].values[i]);
      sq += d * d;
      ++n;
    }
    if (n == 0) {
      ++empty;
      continue;
    }
    total += std::sqrt(sq / static_cast<double>(n));
    ++used;
  }
  if (skipped) *skipped = empty;
  if (used == 0) throw AllFramesEmpty("every ground-truth contact mask is empty");
  return total / static_cast<double>(used);
}

// corrected R^2 = 1 - RMSD^2 / variance of masked ground truth, per frame,
// averaged over frames with non-empty masks and non-zero masked variance.
template <typename A, typename B>
inline double corrected_r2(const std::vector<Grid<A>>& pred,
                           const std::vector<Grid<B>>& gt,
                           std::size_t* skipped = nullptr) {
  check_lengths(pred, gt, "corrected_r2");
  double total = 0.0;
  std::size_t used = 0, skip = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    double sum = 0.0, sq = 0.0, err = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < kGridCells; ++i) {
      if (!(gt[f].values[i] > 0)) continue;
      const double g = static_cast<double>(gt[f].values[i]);
      const double p = static_cast<double>(pred[f].values[i]);
      sum += g;
      sq += g * g;
      err += (p - g) * (p - g);
      ++n;
    }
    if (n == 0) {
      ++skip;
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    const double variance = sq / static_cast<double>(n) - mean * mean;
    if (!(variance > 0.0)) {
      ++skip;
      continue;
    }
    const double rmsd2 = err / static_cast<double>(n);
    total += 1.0 - rmsd2 / variance;
    ++used;
  }
  if (skipped) *skipped = skip;
  if (used == 0)
    throw AllFramesEmpty("no frame has a usable contact mask and variance");
  return total / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct MetricRow {
  std::string model;
  double mae_mmhg = 0.0;
  double mask_rmsd_mmhg = 0.0;
  double corrected_r2 = 0.0;
  double binarized_r2 = 0.0;
  std::size_t frames = 0;
  std::size_t skipped_mask_frames = 0;
  std::size_t skipped_variance_frames = 0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::string dataset_id;
};

template <typename A, typename B>
inline MetricRow evaluate_model(const std::string& name,
                                const std::vector<Grid<A>>& pred,
                                const std::vector<Grid<B>>& gt) {
  MetricRow row;
  row.model = name;
  row.frames = gt.size();
  try {
    row.mae_mmhg = mae(pred, gt);
    row.mask_rmsd_mmhg = mask_rmsd(pred, gt, &row.skipped_mask_frames);
    row.corrected_r2 = corrected_r2(pred, gt, &row.skipped_variance_frames);
    row.binarized_r2 = binarized_r_squared(pred, gt);
  } catch (const Error& e) {
    throw LengthMismatch("model '" + name + "': " + e.what());
  }
  return row;
}

template <typename A, typename B>
inline MetricReport report(
    const std::vector<std::pair<std::string, std::vector<Grid<A>>>>& models,
    const std::vector<Grid<B>>& gt, const std::string& dataset_id = "") {
  MetricReport rep;
  rep.dataset_id = dataset_id;
  for (const auto& [name, pred] : models)
    rep.rows.push_back(evaluate_model(name, pred, gt));
  return rep;
}

inline std::string report_csv(const MetricReport& rep) {
  std::string out = "model,mae_mmhg,mask_rmsd_mmhg,corrected_r2,binarized_r2,frames\n";
  char line[256];
  for (const MetricRow& r : rep.rows) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%zu\n",
                  r.model.c_str(), r.mae_mmhg, r.mask_rmsd_mmhg,
                  r.corrected_r2, r.binarized_r2, r.frames);
    out += line;
  }
  return out;
}

inline std::string report_text(const MetricReport& rep) {
  std::string out;
  char line[256];
  if (!rep.dataset_id.empty()) out += "dataset: " + rep.dataset_id + "\n";
  std::snprintf(line, sizeof(line), "%-16s %12s %14s %14s %14s %8s\n", "model",
                "MAE(mmHg)", "MaskRMSD(mmHg)", "CorrectedR2", "BinarizedR2",
                "frames");
  out += line;
  for (const MetricRow& r : rep.rows) {
    std::snprintf(line, sizeof(line), "%-16s %12.3f %14.3f %14.4f %14.4f %8zu\n",
                  r.model.c_str(), r.mae_mmhg, r.mask_rmsd_mmhg,
                  r.corrected_r2, r.binarized_r2, r.frames);
    out += line;
  }
  return out;
}

}  // namespace pressim
