#pragma once

// Built-in consistency checks for the `selftest` subcommand: gradient
// correctness, metric agreement with the reference implementations, and
// settle-solver force balance. Each check prints one pass/fail line.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "pressim/body.hpp"
#include "pressim/metrics.hpp"
#include "pressim/nn.hpp"
#include "pressim/nn_train.hpp"
#include "pressim/reference.hpp"
#include "pressim/rng.hpp"
#include "pressim/sim.hpp"

namespace pressim::selftest {

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

inline PressureFrame random_pressure_frame(Rng& rng, double density = 0.15) {
  PressureFrame f{};
  for (int i = 0; i < kGridCells; ++i)
    if (rng.next_double() < density)
      f.values[i] = static_cast<float>(rng.uniform(0.0, 5000.0));
  return f;
}

inline DeformationFrame random_deform_frame(Rng& rng, double density = 0.15) {
  DeformationFrame f{};
  for (int i = 0; i < kGridCells; ++i)
    if (rng.next_double() < density)
      f.values[i] = static_cast<std::uint8_t>(rng.next_below(256));
  return f;
}

// Random capsule bodies resting near the plane, inside the mat footprint.
inline BodySolid random_body(Rng& rng) {
  BodySolid body;
  const int n = 3 + static_cast<int>(rng.next_below(8));
  for (int i = 0; i < n; ++i) {
    Capsule c;
    c.radius = rng.uniform(0.03, 0.12);
    c.a = {rng.uniform(0.08, 0.48), rng.uniform(0.15, 1.5),
           c.radius + rng.uniform(0.0, 0.02)};
    c.b = {c.a.x + rng.uniform(-0.25, 0.25), c.a.y + rng.uniform(-0.4, 0.4),
           c.radius + rng.uniform(0.0, 0.05)};
    body.capsules.push_back(c);
  }
  body.total_mass = rng.uniform(40.0, 110.0);
  return body;
}

inline CheckResult check_metric_oracles(int pairs = 50,
                                        double tolerance = 1e-9) {
  Rng rng(20240501);
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    std::vector<Grid<double>> pred(1), gt(1);
    for (int i = 0; i < kGridCells; ++i) {
      gt[0].values[i] =
          rng.next_double() < 0.2 ? rng.uniform(0.0, 5000.0) : 0.0;
      pred[0].values[i] =
          rng.next_double() < 0.25 ? rng.uniform(0.0, 5000.0) : 0.0;
    }
    worst = std::max(worst, std::abs(mae(pred, gt) - reference::mae(pred, gt)));
    worst = std::max(worst, std::abs(binarized_r_squared(pred, gt) -
                                     reference::binarized_r_squared(pred, gt)));
    worst = std::max(worst,
                     std::abs(mask_rmsd(pred, gt) - reference::mask_rmsd(pred, gt)));
    worst = std::max(worst, std::abs(corrected_r2(pred, gt) -
                                     reference::corrected_r2(pred, gt)));
  }
  return {"metric-oracles", worst < tolerance,
          "max |fast - reference| = " + std::to_string(worst)};
}

inline CheckResult check_settle_force_balance(int bodies = 25) {
  Rng rng(77);
  PlaneModel plane;
  double worst_residual = 0.0;
  for (int i = 0; i < bodies; ++i) {
    const BodySolid body = random_body(rng);
    try {
      const SettleResult s = settle(body, plane);
      worst_residual = std::max(worst_residual, s.residual);
    } catch (const NoContact&) {
      // acceptable for a body generated off the active area
    }
  }
  // Flat patch of 100 cells: closed-form depth = m g / (n k).
  BodySolid flat;
  flat.total_mass = 74.3;
  for (int r = 20; r < 30; ++r)
    for (int c = 9; c < 19; ++c)
      flat.capsules.push_back({{plane.cell_center_x(c), plane.cell_center_y(r), 0.008},
                               {plane.cell_center_x(c), plane.cell_center_y(r), 0.2},
                               0.008});
  const SettleResult s = settle(flat, plane);
  const double expected = 74.3 * plane.gravity / (100.0 * plane.stiffness_k);
  const bool flat_ok = std::abs(s.settle_depth - expected) < 5e-7 &&
                       s.contact_cells.size() == 100;
  const bool ok = worst_residual < kSettleResidualTol && flat_ok;
  return {"settle-force-balance", ok,
          "max residual = " + std::to_string(worst_residual) +
              ", flat-patch depth = " + std::to_string(s.settle_depth) +
              " (expected " + std::to_string(expected) + ")"};
}

inline CheckResult check_alpha_recovery() {
  Rng rng(5150);
  double worst = 0.0;
  for (double alpha : {0.5, 3.0, 19.6}) {
    DeformationFrame d = random_deform_frame(rng);
    PressureFrame p{};
    for (int i = 0; i < kGridCells; ++i)
      p.values[i] = static_cast<float>(alpha * d.values[i]);
    const double est = alpha_estimate(p, d);
    worst = std::max(worst, std::abs(est - alpha) / alpha);
  }
  return {"alpha-recovery", worst < 1e-6,
          "max relative error = " + std::to_string(worst)};
}

inline CheckResult check_gradients(std::size_t per_type = 60,
                                   double tolerance = 1e-3) {
  double worst = 0.0;
  std::string detail;
  for (auto kind : {nn::NetworkKind::TPN, nn::NetworkKind::TDN,
                    nn::NetworkKind::PSN, nn::NetworkKind::Baseline}) {
    auto net = nn::build_model<double>(kind, 99);
    Rng rng(derive_seed(4242, "selftest-grad",
                        static_cast<std::uint64_t>(kind)));
    nn::Tensor<double> sample(
        {2, net.input_shape.c, net.input_shape.d, net.input_shape.h,
         net.input_shape.w});
    for (auto& v : sample.v) v = rng.uniform(-0.5, 0.5);
    nn::Tensor<double> target({2, kGridRows, kGridCols});
    for (auto& v : target.v) v = rng.uniform(0.0, 0.3);
    const auto report = nn::grad_check(net, sample, target, per_type);
    worst = std::max(worst, report.max_rel_error);
    detail += std::string(to_string(kind)) + "=" +
              std::to_string(report.max_rel_error) + " ";
  }
  return {"gradient-check", worst < tolerance, detail};
}

inline int run_all(bool verbose = true) {
  using clock = std::chrono::steady_clock;
  int failures = 0;
  auto run = [&](CheckResult (*fn)()) {
    const auto t0 = clock::now();
    const CheckResult r = fn();
    const double secs =
        std::chrono::duration<double>(clock::now() - t0).count();
    if (verbose)
      std::printf("[%s] %-22s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.detail.c_str(), secs);
    failures += r.passed ? 0 : 1;
  };
  run([] { return check_metric_oracles(); });
  run([] { return check_settle_force_balance(); });
  run([] { return check_alpha_recovery(); });
  run([] { return check_gradients(); });
  return failures;
}

}  // namespace pressim::selftest
