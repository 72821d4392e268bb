#pragma once

// Straightforward reference implementations used to cross-check the fast
// paths (selftest and the verification suites). Everything here is written
// as plain double loops directly from the metric definitions and stays
// independent of metrics.hpp / sim.hpp internals.

#include <cmath>
#include <vector>

#include "pressim/core.hpp"

namespace pressim::reference {

template <typename A, typename B>
double mae(const std::vector<Grid<A>>& pred, const std::vector<Grid<B>>& gt) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (int r = 0; r < kGridRows; ++r) {
      for (int c = 0; c < kGridCols; ++c) {
        total += std::abs(static_cast<double>(pred[f](r, c)) -
                          static_cast<double>(gt[f](r, c)));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

template <typename A, typename B>
double binarized_r_squared(const std::vector<Grid<A>>& pred,
                           const std::vector<Grid<B>>& gt) {
  double total = 0.0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    double mean = 0.0;
    for (int r = 0; r < kGridRows; ++r)
      for (int c = 0; c < kGridCols; ++c)
        mean += gt[f](r, c) > 0 ? 1.0 : 0.0;
    mean /= kGridCells;
    double ss_res = 0.0, ss_tot = 0.0;
    for (int r = 0; r < kGridRows; ++r) {
      for (int c = 0; c < kGridCols; ++c) {
        const double g = gt[f](r, c) > 0 ? 1.0 : 0.0;
        const double p = pred[f](r, c) > 0 ? 1.0 : 0.0;
        ss_res += (g - p) * (g - p);
        ss_tot += (g - mean) * (g - mean);
      }
    }
    if (ss_tot > 0.0)
      total += 1.0 - ss_res / ss_tot;
    else
      total += ss_res == 0.0 ? 1.0 : 0.0;
  }
  return total / static_cast<double>(gt.size());
}

template <typename A, typename B>
double mask_rmsd(const std::vector<Grid<A>>& pred,
                 const std::vector<Grid<B>>& gt) {
  double total = 0.0;
  std::size_t frames = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    double sq = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < kGridRows; ++r) {
      for (int c = 0; c < kGridCols; ++c) {
        if (gt[f](r, c) > 0) {
          const double d = static_cast<double>(pred[f](r, c)) -
                           static_cast<double>(gt[f](r, c));
          sq += d * d;
          ++n;
        }
      }
    }
    if (n > 0) {
      total += std::sqrt(sq / static_cast<double>(n));
      ++frames;
    }
  }
  return frames ? total / static_cast<double>(frames) : 0.0;
}

template <typename A, typename B>
double corrected_r2(const std::vector<Grid<A>>& pred,
                    const std::vector<Grid<B>>& gt) {
  double total = 0.0;
  std::size_t frames = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    std::vector<double> g_vals, p_vals;
    for (int r = 0; r < kGridRows; ++r) {
      for (int c = 0; c < kGridCols; ++c) {
        if (gt[f](r, c) > 0) {
          g_vals.push_back(static_cast<double>(gt[f](r, c)));
          p_vals.push_back(static_cast<double>(pred[f](r, c)));
        }
      }
    }
    if (g_vals.empty()) continue;
    double mean = 0.0;
    for (double g : g_vals) mean += g;
    mean /= static_cast<double>(g_vals.size());
    double variance = 0.0;
    for (double g : g_vals) variance += (g - mean) * (g - mean);
    variance /= static_cast<double>(g_vals.size());
    if (!(variance > 0.0)) continue;
    double rmsd2 = 0.0;
    for (std::size_t i = 0; i < g_vals.size(); ++i)
      rmsd2 += (p_vals[i] - g_vals[i]) * (p_vals[i] - g_vals[i]);
    rmsd2 /= static_cast<double>(g_vals.size());
    total += 1.0 - rmsd2 / variance;
    ++frames;
  }
  return frames ? total / static_cast<double>(frames) : 0.0;
}

// Minimizes sum (p - a*d)^2 by refining scans over a 1-D grid of a.
inline double alpha_grid_search(const PressureFrame& pressure,
                                const DeformationFrame& deformation) {
  auto objective = [&](double a) {
    double s = 0.0;
    for (int i = 0; i < kGridCells; ++i) {
      const double d = static_cast<double>(pressure.values[i]) -
                       a * static_cast<double>(deformation.values[i]);
      s += d * d;
    }
    return s;
  };
  double lo = -1e4, hi = 1e4;
  double best = 0.0;
  for (int pass = 0; pass < 8; ++pass) {
    double best_obj = std::numeric_limits<double>::infinity();
    const double step = (hi - lo) / 1000.0;
    for (int i = 0; i <= 1000; ++i) {
      const double a = lo + i * step;
      const double o = objective(a);
      if (o < best_obj) {
        best_obj = o;
        best = a;
      }
    }
    lo = best - step;
    hi = best + step;
  }
  return best;
}

// Spring balance located by scanning depths on a uniform ladder, then
// refining. Verifies the bisection path independently.
inline double settle_depth_by_scan(const std::vector<double>& heights,
                                   double mass, double stiffness_k,
                                   double gravity, double max_depth = 0.5) {
  auto force = [&](double d) {
    double sum = 0.0;
    for (double h : heights)
      if (d - h > 0.0) sum += (d - h);
    return stiffness_k * sum;
  };
  const double weight = mass * gravity;
  double lo = -max_depth, hi = max_depth;
  for (int pass = 0; pass < 12; ++pass) {
    const double step = (hi - lo) / 1000.0;
    double found = hi;
    for (int i = 0; i <= 1000; ++i) {
      const double d = lo + i * step;
      if (force(d) >= weight) {
        found = d;
        break;
      }
    }
    lo = found - step;
    hi = found;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pressim::reference
