#pragma once

// Timestamp alignment of the ~30 fps pose stream against the ~10 fps
// deformation/pressure streams, sliding-window construction, normalization,
// and leakage-safe dataset splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "pressim/core.hpp"
#include "pressim/pose.hpp"
#include "pressim/seqfile.hpp"

namespace pressim {

inline constexpr int kWindowWidth = 10;
inline constexpr double kAlignToleranceDefault = 0.075;  // seconds

struct AlignedEntry {
  int pose_index;     // source frame in the pose stream
  int deform_index;   // source frame in the deformation stream
  std::vector<Vec3> pose;
  DeformationFrame deform;
  PressureFrame pressure;
  double timestamp;   // pressure frame timestamp
};

struct AlignedDataset {
  SubjectProfile subject;
  int joint_count = 17;
  std::vector<AlignedEntry> entries;

  std::size_t size() const { return entries.size(); }
};

namespace align_detail {

// Index of the timestamp nearest to t (ties resolve to the earlier frame).
inline int nearest_index(const std::vector<double>& ts, double t) {
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  if (it == ts.begin()) return 0;
  if (it == ts.end()) return static_cast<int>(ts.size()) - 1;
  int hi = static_cast<int>(it - ts.begin());
  int lo = hi - 1;
  return (t - ts[lo]) <= (ts[hi] - t) ? lo : hi;
}

}  // namespace align_detail

// For every pressure frame, picks the nearest pose and deformation frames by
// timestamp; frames farther than the tolerance from either stream drop out.
inline AlignedDataset align_streams(const PoseSequence& poses,
                                    const std::vector<DeformationFrame>& deforms,
                                    const std::vector<double>& deform_ts,
                                    const std::vector<PressureFrame>& pressures,
                                    const std::vector<double>& pressure_ts,
                                    const SubjectProfile& subject,
                                    double tolerance = kAlignToleranceDefault) {
  if (poses.size() == 0) throw EmptyStream("pose stream is empty");
  if (deforms.empty()) throw EmptyStream("deformation stream is empty");
  if (pressures.empty()) throw EmptyStream("pressure stream is empty");
  if (deforms.size() != deform_ts.size() ||
      pressures.size() != pressure_ts.size())
    throw LengthMismatch("stream frame/timestamp counts differ");

  AlignedDataset out;
  out.subject = subject;
  out.joint_count = poses.skeleton.joints();
  for (std::size_t i = 0; i < pressures.size(); ++i) {
    const double t = pressure_ts[i];
    const int pi = align_detail::nearest_index(poses.timestamps, t);
    const int di = align_detail::nearest_index(deform_ts, t);
    if (std::abs(poses.timestamps[pi] - t) > tolerance) continue;
    if (std::abs(deform_ts[di] - t) > tolerance) continue;
    AlignedEntry e;
    e.pose_index = pi;
    e.deform_index = di;
    e.pose = poses.frames[pi].joints;
    e.deform = deforms[di];
    e.pressure = pressures[i];
    e.timestamp = t;
    out.entries.push_back(std::move(e));
  }
  if (out.entries.empty())
    throw NoOverlap("no pressure frame found pose/deformation neighbors "
                    "within tolerance");
  return out;
}

// ---------------------------------------------------------------------------
// Sliding windows
// ---------------------------------------------------------------------------

// One model input: ten aligned frames of pose + deformation, targeting the
// last frame's pressure map.
struct Window {
  std::vector<std::vector<Vec3>> pose_input;   // width x J
  std::vector<DeformationFrame> deform_input;  // width
  PressureFrame target;
  double target_timestamp = 0.0;
};

struct WindowRef {
  int sequence;
  int start;
};

struct WindowedDataset {
  std::shared_ptr<std::vector<AlignedDataset>> sequences =
      std::make_shared<std::vector<AlignedDataset>>();
  std::vector<WindowRef> windows;
  int width = kWindowWidth;
  int joint_count = 17;

  std::size_t size() const { return windows.size(); }

  const AlignedEntry& entry(const WindowRef& ref, int offset) const {
    return (*sequences)[ref.sequence].entries[ref.start + offset];
  }
  const AlignedEntry& target_entry(std::size_t window) const {
    return entry(windows[window], width - 1);
  }

  Window materialize(std::size_t window) const {
    const WindowRef ref = windows[window];
    Window w;
    w.pose_input.reserve(width);
    w.deform_input.reserve(width);
    for (int k = 0; k < width; ++k) {
      const AlignedEntry& e = entry(ref, k);
      w.pose_input.push_back(e.pose);
      w.deform_input.push_back(e.deform);
    }
    const AlignedEntry& last = entry(ref, width - 1);
    w.target = last.pressure;
    w.target_timestamp = last.timestamp;
    return w;
  }

  // True when two windows share at least one aligned frame.
  bool overlaps(std::size_t a, std::size_t b) const {
    const WindowRef& wa = windows[a];
    const WindowRef& wb = windows[b];
    return wa.sequence == wb.sequence &&
           std::abs(wa.start - wb.start) < width;
  }
};

// Stride-1 windows over one aligned sequence: count = len - width.
inline WindowedDataset make_windows(AlignedDataset aligned,
                                    int width = kWindowWidth) {
  if (static_cast<int>(aligned.size()) < width)
    throw TooShort("aligned dataset has " + std::to_string(aligned.size()) +
                   " frames, need at least " + std::to_string(width));
  WindowedDataset ds;
  ds.width = width;
  ds.joint_count = aligned.joint_count;
  const int n = static_cast<int>(aligned.size()) - width;
  ds.sequences->push_back(std::move(aligned));
  ds.windows.reserve(n);
  for (int i = 0; i < n; ++i) ds.windows.push_back({0, i});
  return ds;
}

inline WindowedDataset make_windows(std::vector<AlignedDataset> aligned,
                                    int width = kWindowWidth) {
  if (aligned.empty()) throw EmptyDataset("no aligned sequences");
  WindowedDataset ds;
  ds.width = width;
  ds.joint_count = aligned.front().joint_count;
  for (std::size_t s = 0; s < aligned.size(); ++s) {
    if (aligned[s].joint_count != ds.joint_count)
      throw DimensionMismatch("aligned sequences disagree on joint count");
    if (static_cast<int>(aligned[s].size()) < width)
      throw TooShort("aligned sequence " + std::to_string(s) + " has " +
                     std::to_string(aligned[s].size()) + " frames");
    const int n = static_cast<int>(aligned[s].size()) - width;
    for (int i = 0; i < n; ++i)
      ds.windows.push_back({static_cast<int>(s), i});
  }
  *ds.sequences = std::move(aligned);
  return ds;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct NormalizationConstants {
  double pressure_scale = kPressureMaxMmHg;  // mmHg -> [0,1]
  double deform_scale = kDeformMax;          // 0-255 -> [0,1]
  double pose_scale = kPoseScale;            // meters / mat diagonal
};

// Flat float buffers ready to feed a network.
struct NormalizedWindow {
  std::vector<float> pose;    // width * J * 3
  std::vector<float> deform;  // width * 2240
  std::vector<float> target;  // 2240
};

inline NormalizedWindow normalize(const Window& w,
                                  const NormalizationConstants& c = {}) {
  NormalizedWindow out;
  for (const auto& frame : w.pose_input)
    for (const Vec3& v : frame) {
      out.pose.push_back(static_cast<float>(v.x / c.pose_scale));
      out.pose.push_back(static_cast<float>(v.y / c.pose_scale));
      out.pose.push_back(static_cast<float>(v.z / c.pose_scale));
    }
  for (const auto& frame : w.deform_input)
    for (int i = 0; i < kGridCells; ++i)
      out.deform.push_back(static_cast<float>(frame.values[i] /
                                              c.deform_scale));
  for (int i = 0; i < kGridCells; ++i)
    out.target.push_back(static_cast<float>(w.target.values[i] /
                                            c.pressure_scale));
  return out;
}

inline Window denormalize(const NormalizedWindow& n, int joint_count,
                          int width = kWindowWidth,
                          const NormalizationConstants& c = {}) {
  Window w;
  std::size_t p = 0;
  for (int f = 0; f < width; ++f) {
    std::vector<Vec3> joints(joint_count);
    for (int j = 0; j < joint_count; ++j) {
      joints[j].x = n.pose[p++] * c.pose_scale;
      joints[j].y = n.pose[p++] * c.pose_scale;
      joints[j].z = n.pose[p++] * c.pose_scale;
    }
    w.pose_input.push_back(std::move(joints));
  }
  std::size_t d = 0;
  for (int f = 0; f < width; ++f) {
    DeformationFrame frame{};
    for (int i = 0; i < kGridCells; ++i) {
      frame.values[i] = static_cast<std::uint8_t>(
          std::lround(n.deform[d++] * c.deform_scale));
    }
    w.deform_input.push_back(frame);
  }
  for (int i = 0; i < kGridCells; ++i)
    w.target.values[i] = n.target[i] * static_cast<float>(c.pressure_scale);
  return w;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Contiguous-block split over the window index range. The validation block
// always sits between train and test so that, with the guard enabled,
// stride-1 window overlap (width-1 shared frames) cannot leak between train
// and test; the seed rotates which end the train block occupies. Windows
// still violating the guard (possible only when the validation block is
// thinner than width-1) are reassigned to validation.
inline DatasetSplit split_windows(const WindowedDataset& ds, double train_ratio,
                                  double val_ratio, double test_ratio,
                                  std::uint64_t seed, bool guard_gap = true) {
  if (!(train_ratio > 0.0) || !(val_ratio > 0.0) || !(test_ratio > 0.0))
    throw BadRatios("split ratios must be positive");
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
    throw BadRatios("split ratios must sum to 1");

  const std::size_t n = ds.size();
  DatasetSplit split;
  split.seed = seed;
  if (n == 0) return split;

  std::size_t n_train = static_cast<std::size_t>(
      std::llround(train_ratio * static_cast<double>(n)));
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_ratio * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  const std::size_t n_test = n - n_train - n_val;

  enum Role : unsigned char { Train, Val, Test };
  std::vector<Role> role(n);
  const bool train_first = (seed % 2) == 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t a = train_first ? n_train : n_test;
    if (i < a)
      role[i] = train_first ? Train : Test;
    else if (i < a + n_val)
      role[i] = Val;
    else
      role[i] = train_first ? Test : Train;
  }

  if (guard_gap && ds.width > 1) {
    const std::size_t reach = static_cast<std::size_t>(ds.width - 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (role[i] != Test) continue;
      const std::size_t lo = i >= reach ? i - reach : 0;
      const std::size_t hi = std::min(n - 1, i + reach);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (role[j] == Train && ds.overlaps(i, j)) {
          role[i] = Val;
          break;
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    switch (role[i]) {
      case Train: split.train.push_back(i); break;
      case Val: split.validation.push_back(i); break;
      case Test: split.test.push_back(i); break;
    }
  }
  return split;
}

}  // namespace pressim
