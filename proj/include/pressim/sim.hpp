#pragma once

// Quasi-static contact solver. The body is free only in Z; gravity settles it
// onto a bed of linear springs, one per sensor cell, sampled at the cell's
// active-area center. Bisection finds the settle depth where the total spring
// reaction equals body weight, then penetrations are rendered to the 0-255
// deformation profile and a reference pressure map.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pressim/body.hpp"
#include "pressim/core.hpp"
#include "pressim/parallel.hpp"
#include "pressim/pose.hpp"

namespace pressim {

struct PlaneModel {
  int rows = kGridRows;
  int cols = kGridCols;
  double pitch_y = kPitchY;        // meters per row
  double pitch_x = kPitchX;        // meters per column
  double stiffness_k = 1.0e3;      // N per meter of penetration per cell
  double d_max_mm = 10.0;          // penetration rendered as 255
  double gravity = 9.81;           // m/s^2

  void validate() const {
    if (!(stiffness_k > 0.0)) throw InvalidSpec("plane stiffness must be > 0");
    if (!(d_max_mm > 0.0)) throw InvalidSpec("plane d_max must be > 0");
  }
  double cell_center_x(int col) const { return (col + 0.5) * pitch_x; }
  double cell_center_y(int row) const { return (row + 0.5) * pitch_y; }
};

struct ContactCell {
  int row;
  int col;
  double penetration;  // meters
};

struct SettleResult {
  double settle_depth = 0.0;          // meters the body was lowered
  std::vector<ContactCell> contact_cells;  // row-major order
  double residual = 0.0;              // |sum k*pen - m*g| / (m*g)
};

// Lowest body surface height above each cell center. Cells the body's
// XY silhouette never covers get +inf. For each capsule: if the cell center
// is within radius of the axis' XY projection, the surface dips to
// (axis Z at closest point) - sqrt(r^2 - rho^2).
inline std::vector<double> surface_heights(const BodySolid& body,
                                           const PlaneModel& plane) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> h(static_cast<std::size_t>(plane.rows) * plane.cols, inf);
  for (const Capsule& cap : body.capsules) {
    const double ax = cap.a.x, ay = cap.a.y;
    const double dx = cap.b.x - ax, dy = cap.b.y - ay;
    const double seg_len2 = dx * dx + dy * dy;
    const double r = cap.radius;
    // Conservative XY bounding box of the capsule footprint.
    const double min_x = std::min(cap.a.x, cap.b.x) - r;
    const double max_x = std::max(cap.a.x, cap.b.x) + r;
    const double min_y = std::min(cap.a.y, cap.b.y) - r;
    const double max_y = std::max(cap.a.y, cap.b.y) + r;
    int c0 = std::max(0, static_cast<int>(std::floor(min_x / plane.pitch_x - 0.5)));
    int c1 = std::min(plane.cols - 1,
                      static_cast<int>(std::ceil(max_x / plane.pitch_x)));
    int r0 = std::max(0, static_cast<int>(std::floor(min_y / plane.pitch_y - 0.5)));
    int r1 = std::min(plane.rows - 1,
                      static_cast<int>(std::ceil(max_y / plane.pitch_y)));
    for (int row = r0; row <= r1; ++row) {
      const double cy = plane.cell_center_y(row);
      for (int col = c0; col <= c1; ++col) {
        const double cx = plane.cell_center_x(col);
        double t = 0.0;
        if (seg_len2 > 0.0) {
          t = ((cx - ax) * dx + (cy - ay) * dy) / seg_len2;
          t = std::clamp(t, 0.0, 1.0);
        }
        const double px = ax + t * dx - cx;
        const double py = ay + t * dy - cy;
        const double rho2 = px * px + py * py;
        if (rho2 > r * r) continue;
        const double axis_z = cap.a.z + t * (cap.b.z - cap.a.z);
        const double surf = axis_z - std::sqrt(r * r - rho2);
        double& cell = h[static_cast<std::size_t>(row) * plane.cols + col];
        cell = std::min(cell, surf);
      }
    }
  }
  return h;
}

namespace sim_detail {

// Total spring force when the body is lowered by depth d. Row-major
// accumulation keeps the sum order fixed.
inline double spring_force(const std::vector<double>& heights, double k,
                           double d, int* contacts = nullptr) {
  double pen_sum = 0.0;
  int n = 0;
  for (double h : heights) {
    const double pen = d - h;
    if (pen > 0.0) {
      pen_sum += pen;
      ++n;
    }
  }
  if (contacts) *contacts = n;
  return k * pen_sum;
}

}  // namespace sim_detail

inline constexpr double kSettleMaxDepth = 0.5;       // meters
inline constexpr double kSettleResidualTol = 1e-6;
inline constexpr int kSettleMaxIterations = 200;

// Core solve on a precomputed height field.
inline SettleResult settle_heightfield(const std::vector<double>& heights,
                                       double total_mass,
                                       const PlaneModel& plane) {
  plane.validate();
  if (!(total_mass > 0.0)) throw InvalidSpec("body mass must be positive");
  const double weight = total_mass * plane.gravity;
  const double k = plane.stiffness_k;

  double lowest = std::numeric_limits<double>::infinity();
  for (double h : heights) lowest = std::min(lowest, h);

  int contacts_at_max = 0;
  const double force_at_max =
      sim_detail::spring_force(heights, k, kSettleMaxDepth, &contacts_at_max);
  if (force_at_max < weight) {
    if (contacts_at_max == 0)
      throw NoContact("body cannot reach the plane within " +
                      std::to_string(kSettleMaxDepth) + " m");
    throw NonConvergence(
        "spring reaction cannot balance weight within the search depth");
  }

  // Bracket: force is zero at first contact and monotone in depth.
  double lo = std::min(0.0, lowest);
  double hi = kSettleMaxDepth;
  double d = 0.5 * (lo + hi);
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kSettleMaxIterations; ++it) {
    d = 0.5 * (lo + hi);
    const double force = sim_detail::spring_force(heights, k, d);
    residual = std::abs(force - weight) / weight;
    if (residual < kSettleResidualTol) break;
    if (force < weight)
      lo = d;
    else
      hi = d;
  }
  if (!(residual < kSettleResidualTol))
    throw NonConvergence("settle bisection residual " +
                         std::to_string(residual) + " after " +
                         std::to_string(kSettleMaxIterations) + " iterations");

  SettleResult result;
  result.settle_depth = d;
  result.residual = residual;
  for (int row = 0; row < plane.rows; ++row) {
    for (int col = 0; col < plane.cols; ++col) {
      const double pen =
          d - heights[static_cast<std::size_t>(row) * plane.cols + col];
      if (pen > 0.0) result.contact_cells.push_back({row, col, pen});
    }
  }
  return result;
}

inline SettleResult settle(const BodySolid& body, const PlaneModel& plane) {
  if (body.capsules.empty()) throw InvalidSpec("body has no capsules");
  return settle_heightfield(surface_heights(body, plane), body.total_mass,
                            plane);
}

// value = round(255 * min(pen, d_max) / d_max); force itself is never clamped.
inline DeformationFrame rasterize_deformation(const SettleResult& settle,
                                              const PlaneModel& plane) {
  DeformationFrame frame{};
  const double d_max = plane.d_max_mm * 1e-3;
  for (const ContactCell& cell : settle.contact_cells) {
    const double v = 255.0 * std::min(cell.penetration, d_max) / d_max;
    frame(cell.row, cell.col) = static_cast<std::uint8_t>(std::lround(v));
  }
  return frame;
}

// Synthetic ground-truth pressure: cell force / active sensor area, in mmHg,
// clipped to the mat's measuring range.
inline PressureFrame reference_pressure(const SettleResult& settle,
                                        const PlaneModel& plane) {
  PressureFrame frame{};
  for (const ContactCell& cell : settle.contact_cells) {
    const double force = plane.stiffness_k * cell.penetration;
    const double mmhg = force / kSensorAreaM2 / kPascalPerMmHg;
    frame(cell.row, cell.col) =
        static_cast<float>(std::clamp(mmhg, 0.0, kPressureMaxMmHg));
  }
  return frame;
}

struct SimulatedSequence {
  std::vector<DeformationFrame> deformation;
  std::vector<PressureFrame> pressure;
  std::vector<double> timestamps;
};

// Frame-wise simulation. Off-mat frames yield all-zero grids; a
// non-converged frame aborts with its index. Frames are independent, so the
// parallel schedule cannot change results.
inline SimulatedSequence simulate_sequence(const PoseSequence& poses,
                                           const SubjectProfile& subject,
                                           const PlaneModel& plane) {
  const auto report = validate_pose_sequence(poses);
  if (!report.ok())
    throw InvalidSpec("pose sequence failed validation with " +
                      std::to_string(report.violations.size()) +
                      " violation(s)");
  const std::size_t n = poses.size();
  SimulatedSequence out;
  out.deformation.resize(n);
  out.pressure.resize(n);
  out.timestamps = poses.timestamps;

  std::vector<std::string> errors(n);
  parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t i) {
    try {
      const BodySolid body =
          body_geometry(poses.frames[i], poses.skeleton, subject);
      try {
        const SettleResult s = settle(body, plane);
        out.deformation[i] = rasterize_deformation(s, plane);
        out.pressure[i] = reference_pressure(s, plane);
      } catch (const NoContact&) {
        // Body off the mat: zero grids, not an error.
        out.deformation[i] = DeformationFrame{};
        out.pressure[i] = PressureFrame{};
      }
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty())
      throw NonConvergence("frame " + std::to_string(i) + ": " + errors[i]);
  }
  return out;
}

// Least-squares scalar relating a pressure map to its deformation profile.
inline double alpha_estimate(const PressureFrame& pressure,
                             const DeformationFrame& deformation) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < kGridCells; ++i) {
    const double d = static_cast<double>(deformation.values[i]);
    num += static_cast<double>(pressure.values[i]) * d;
    den += d * d;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace pressim
