#pragma once

// Deterministic synthetic motion. Each template is a pair of key postures
// authored for a 175 cm reference body; frames come from forward kinematics
// with fixed bone lengths and blended bone directions, so bone lengths are
// exact by construction. A grounding step translates the body vertically so
// the template's contact joints rest at their capsule clearance heights.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pressim/core.hpp"
#include "pressim/pose.hpp"
#include "pressim/rng.hpp"

namespace pressim {

enum class MotionTemplate : std::uint8_t {
  StandSway = 0,
  SquatCycle = 1,
  Plank = 2,
  Bridge = 3,
  Supine = 4,
  SitToStand = 5,
};

inline const char* to_string(MotionTemplate t) {
  switch (t) {
    case MotionTemplate::StandSway: return "stand_sway";
    case MotionTemplate::SquatCycle: return "squat_cycle";
    case MotionTemplate::Plank: return "plank";
    case MotionTemplate::Bridge: return "bridge";
    case MotionTemplate::Supine: return "supine";
    case MotionTemplate::SitToStand: return "sit_to_stand";
  }
  return "?";
}

inline MotionTemplate motion_template_from_string(const std::string& s) {
  for (int i = 0; i <= 5; ++i) {
    auto t = static_cast<MotionTemplate>(i);
    if (s == to_string(t)) return t;
  }
  throw InvalidSpec("unknown motion template: " + s);
}

struct MotionSpec {
  MotionTemplate tmpl = MotionTemplate::StandSway;
  double duration_s = 10.0;
  double fps = 10.0;
  double noise_amplitude_m = 0.01;
  std::uint64_t seed = 0;
};

namespace motion_detail {

// Key postures are authored on the 25-joint layout; the 17-joint skeleton
// picks its joints by name.
enum B25 : int {
  NOSE = 0, NECK, R_SHO, R_ELB, R_WRI, L_SHO, L_ELB, L_WRI, MID_HIP,
  R_HIP, R_KNE, R_ANK, L_HIP, L_KNE, L_ANK, R_EYE, L_EYE, R_EAR, L_EAR,
  L_TOE, L_TOE2, L_HEEL, R_TOE, R_TOE2, R_HEEL,
};

using KeyPose = std::array<Vec3, 25>;

// Mirrors x for the right-side joint of a left/right pair.
inline void set_lr(KeyPose& p, B25 left, B25 right, double x, double y,
                   double z) {
  p[left] = {x, y, z};
  p[right] = {-x, y, z};
}

inline KeyPose standing_pose() {
  KeyPose p{};
  p[NOSE] = {0, 0.055, 1.560};
  p[NECK] = {0, 0.000, 1.4315};
  p[MID_HIP] = {0, 0.000, 0.9275};
  set_lr(p, L_EYE, R_EYE, 0.033, 0.060, 1.600);
  set_lr(p, L_EAR, R_EAR, 0.065, 0.010, 1.580);
  set_lr(p, L_SHO, R_SHO, 0.200, 0.000, 1.4315);
  set_lr(p, L_ELB, R_ELB, 0.215, 0.010, 1.100);
  set_lr(p, L_WRI, R_WRI, 0.225, 0.020, 0.850);
  set_lr(p, L_HIP, R_HIP, 0.091, 0.000, 0.9275);
  set_lr(p, L_KNE, R_KNE, 0.095, 0.005, 0.500);
  set_lr(p, L_ANK, R_ANK, 0.098, 0.000, 0.0683);
  set_lr(p, L_HEEL, R_HEEL, 0.098, -0.045, 0.030);
  set_lr(p, L_TOE, R_TOE, 0.096, 0.140, 0.020);
  set_lr(p, L_TOE2, R_TOE2, 0.130, 0.120, 0.020);
  return p;
}

inline KeyPose stand_sway_b() {
  KeyPose p = standing_pose();
  // Arms slightly abducted, faint lean.
  set_lr(p, L_ELB, R_ELB, 0.260, 0.030, 1.130);
  set_lr(p, L_WRI, R_WRI, 0.300, 0.060, 0.900);
  p[NOSE] = {0.01, 0.065, 1.555};
  return p;
}

inline KeyPose squat_pose() {
  KeyPose p{};
  p[NOSE] = {0, 0.090, 1.090};
  p[NECK] = {0, 0.020, 0.970};
  p[MID_HIP] = {0, -0.130, 0.460};
  set_lr(p, L_EYE, R_EYE, 0.033, 0.095, 1.130);
  set_lr(p, L_EAR, R_EAR, 0.065, 0.045, 1.110);
  set_lr(p, L_SHO, R_SHO, 0.200, 0.020, 0.970);
  set_lr(p, L_ELB, R_ELB, 0.200, 0.260, 0.900);
  set_lr(p, L_WRI, R_WRI, 0.190, 0.500, 0.920);
  set_lr(p, L_HIP, R_HIP, 0.091, -0.130, 0.460);
  set_lr(p, L_KNE, R_KNE, 0.100, 0.130, 0.300);
  set_lr(p, L_ANK, R_ANK, 0.098, 0.000, 0.0683);
  set_lr(p, L_HEEL, R_HEEL, 0.098, -0.045, 0.030);
  set_lr(p, L_TOE, R_TOE, 0.096, 0.140, 0.020);
  set_lr(p, L_TOE2, R_TOE2, 0.130, 0.120, 0.020);
  return p;
}

inline KeyPose plank_pose() {
  KeyPose p{};
  p[NOSE] = {0, 0.500, 0.500};
  p[NECK] = {0, 0.420, 0.600};
  p[MID_HIP] = {0, -0.045, 0.350};
  set_lr(p, L_EYE, R_EYE, 0.033, 0.510, 0.520);
  set_lr(p, L_EAR, R_EAR, 0.065, 0.460, 0.520);
  set_lr(p, L_SHO, R_SHO, 0.200, 0.420, 0.600);
  set_lr(p, L_ELB, R_ELB, 0.205, 0.440, 0.270);
  set_lr(p, L_WRI, R_WRI, 0.200, 0.460, 0.022);
  set_lr(p, L_HIP, R_HIP, 0.091, -0.045, 0.350);
  set_lr(p, L_KNE, R_KNE, 0.097, -0.440, 0.190);
  set_lr(p, L_ANK, R_ANK, 0.100, -0.800, 0.025);
  set_lr(p, L_HEEL, R_HEEL, 0.100, -0.770, 0.065);
  set_lr(p, L_TOE, R_TOE, 0.098, -0.940, 0.012);
  set_lr(p, L_TOE2, R_TOE2, 0.125, -0.920, 0.012);
  return p;
}

inline KeyPose plank_b() {
  KeyPose p = plank_pose();
  p[MID_HIP].z += 0.030;
  p[L_HIP].z += 0.030;
  p[R_HIP].z += 0.030;
  return p;
}

inline KeyPose bridge_pose() {
  KeyPose p{};
  p[NOSE] = {0, 0.400, 0.190};
  p[NECK] = {0, 0.300, 0.140};
  p[MID_HIP] = {0, -0.100, 0.300};
  set_lr(p, L_EYE, R_EYE, 0.033, 0.435, 0.180);
  set_lr(p, L_EAR, R_EAR, 0.065, 0.440, 0.120);
  set_lr(p, L_SHO, R_SHO, 0.200, 0.300, 0.140);
  set_lr(p, L_ELB, R_ELB, 0.240, 0.120, 0.100);
  set_lr(p, L_WRI, R_WRI, 0.250, -0.100, 0.100);
  set_lr(p, L_HIP, R_HIP, 0.091, -0.100, 0.300);
  set_lr(p, L_KNE, R_KNE, 0.095, -0.500, 0.440);
  set_lr(p, L_ANK, R_ANK, 0.098, -0.620, 0.050);
  set_lr(p, L_HEEL, R_HEEL, 0.098, -0.660, 0.030);
  set_lr(p, L_TOE, R_TOE, 0.096, -0.480, 0.020);
  set_lr(p, L_TOE2, R_TOE2, 0.130, -0.500, 0.020);
  return p;
}

inline KeyPose bridge_b() {
  KeyPose p = bridge_pose();
  // Half-lowered hips.
  p[MID_HIP] = {0, -0.100, 0.180};
  p[L_HIP] = {0.091, -0.100, 0.180};
  p[R_HIP] = {-0.091, -0.100, 0.180};
  p[L_KNE] = {0.095, -0.480, 0.400};
  p[R_KNE] = {-0.095, -0.480, 0.400};
  return p;
}

inline KeyPose supine_pose() {
  KeyPose p{};
  p[NOSE] = {0, 0.380, 0.160};
  p[NECK] = {0, 0.250, 0.140};
  p[MID_HIP] = {0, -0.250, 0.100};
  set_lr(p, L_EYE, R_EYE, 0.033, 0.415, 0.150);
  set_lr(p, L_EAR, R_EAR, 0.065, 0.420, 0.090);
  set_lr(p, L_SHO, R_SHO, 0.200, 0.250, 0.140);
  set_lr(p, L_ELB, R_ELB, 0.240, 0.020, 0.060);
  set_lr(p, L_WRI, R_WRI, 0.250, -0.200, 0.050);
  set_lr(p, L_HIP, R_HIP, 0.091, -0.250, 0.100);
  set_lr(p, L_KNE, R_KNE, 0.095, -0.670, 0.080);
  set_lr(p, L_ANK, R_ANK, 0.098, -1.100, 0.070);
  set_lr(p, L_HEEL, R_HEEL, 0.098, -1.140, 0.040);
  set_lr(p, L_TOE, R_TOE, 0.096, -1.160, 0.120);
  set_lr(p, L_TOE2, R_TOE2, 0.130, -1.150, 0.110);
  return p;
}

inline KeyPose supine_b() {
  KeyPose p = supine_pose();
  // Legs slightly apart, hands beside the head.
  set_lr(p, L_KNE, R_KNE, 0.130, -0.670, 0.080);
  set_lr(p, L_ANK, R_ANK, 0.150, -1.095, 0.070);
  set_lr(p, L_HEEL, R_HEEL, 0.150, -1.135, 0.040);
  set_lr(p, L_TOE, R_TOE, 0.148, -1.155, 0.120);
  set_lr(p, L_TOE2, R_TOE2, 0.182, -1.145, 0.110);
  set_lr(p, L_ELB, R_ELB, 0.260, 0.100, 0.070);
  set_lr(p, L_WRI, R_WRI, 0.300, 0.280, 0.060);
  return p;
}

inline KeyPose seated_pose() {
  KeyPose p{};
  p[NOSE] = {0, 0.100, 0.700};
  p[NECK] = {0, 0.030, 0.580};
  p[MID_HIP] = {0, -0.050, 0.085};
  set_lr(p, L_EYE, R_EYE, 0.033, 0.105, 0.740);
  set_lr(p, L_EAR, R_EAR, 0.065, 0.060, 0.720);
  set_lr(p, L_SHO, R_SHO, 0.200, 0.030, 0.580);
  set_lr(p, L_ELB, R_ELB, 0.220, 0.280, 0.500);
  set_lr(p, L_WRI, R_WRI, 0.230, 0.500, 0.460);
  set_lr(p, L_HIP, R_HIP, 0.091, -0.050, 0.085);
  set_lr(p, L_KNE, R_KNE, 0.095, 0.330, 0.280);
  set_lr(p, L_ANK, R_ANK, 0.098, 0.720, 0.070);
  set_lr(p, L_HEEL, R_HEEL, 0.098, 0.680, 0.035);
  set_lr(p, L_TOE, R_TOE, 0.096, 0.860, 0.050);
  set_lr(p, L_TOE2, R_TOE2, 0.130, 0.840, 0.050);
  return p;
}

inline int b25_index(const std::string& name) {
  static const std::array<const char*, 25> names = {
      "nose", "neck", "right_shoulder", "right_elbow", "right_wrist",
      "left_shoulder", "left_elbow", "left_wrist", "mid_hip", "right_hip",
      "right_knee", "right_ankle", "left_hip", "left_knee", "left_ankle",
      "right_eye", "left_eye", "right_ear", "left_ear", "left_big_toe",
      "left_small_toe", "left_heel", "right_big_toe", "right_small_toe",
      "right_heel"};
  for (int i = 0; i < 25; ++i)
    if (name == names[i]) return i;
  throw InvalidSpec("joint name not present in key postures: " + name);
}

struct Anchor {
  B25 joint;
  BoneClass clearance_class;  // capsule radius supplying the rest height
  double fixed_clearance = -1.0;  // overrides the class radius when >= 0
};

struct TemplateDef {
  KeyPose a;
  KeyPose b;
  double period_s;
  std::vector<Anchor> anchors;
  bool anchor_max;   // true: no contact joint may sit above its clearance
  double sway_x;     // root wander amplitude, meters
  double sway_y;
  double limb_noise; // scale on limb-bone direction noise (0 = pinned limbs)
};

inline TemplateDef template_def(MotionTemplate t) {
  switch (t) {
    case MotionTemplate::StandSway:
      return {standing_pose(), stand_sway_b(), 8.0,
              {{L_ANK, BoneClass::Foot}, {R_ANK, BoneClass::Foot}},
              false, 0.025, 0.015, 1.0};
    case MotionTemplate::SquatCycle:
      return {standing_pose(), squat_pose(), 6.0,
              {{L_ANK, BoneClass::Foot}, {R_ANK, BoneClass::Foot}},
              false, 0.010, 0.010, 1.0};
    case MotionTemplate::Plank:
      return {plank_pose(), plank_b(), 8.0,
              {{L_ANK, BoneClass::Foot, 0.020}, {R_ANK, BoneClass::Foot, 0.020},
               {L_WRI, BoneClass::Forearm, 0.020},
               {R_WRI, BoneClass::Forearm, 0.020}},
              true, 0.005, 0.005, 0.0};
    case MotionTemplate::Bridge:
      return {bridge_pose(), bridge_b(), 6.0,
              {{L_SHO, BoneClass::Torso}, {R_SHO, BoneClass::Torso},
               {L_ANK, BoneClass::Foot}, {R_ANK, BoneClass::Foot},
               {L_EAR, BoneClass::Face}, {R_EAR, BoneClass::Face}},
              false, 0.008, 0.005, 0.3};
    case MotionTemplate::Supine:
      return {supine_pose(), supine_b(), 10.0,
              {{L_SHO, BoneClass::Torso}, {R_SHO, BoneClass::Torso},
               {L_HIP, BoneClass::Thigh}, {R_HIP, BoneClass::Thigh},
               {L_HEEL, BoneClass::Foot}, {R_HEEL, BoneClass::Foot},
               {L_EAR, BoneClass::Face}, {R_EAR, BoneClass::Face}},
              false, 0.010, 0.008, 0.4};
    case MotionTemplate::SitToStand:
      return {standing_pose(), seated_pose(), 10.0,
              {{L_ANK, BoneClass::Foot}, {R_ANK, BoneClass::Foot},
               {L_HIP, BoneClass::Thigh}, {R_HIP, BoneClass::Thigh}},
              false, 0.010, 0.010, 0.6};
  }
  throw InvalidSpec("bad motion template");
}

// Two slow sinusoids per channel; smooth and bounded by |amount|.
struct WobbleChannel {
  double a1, p1, a2, p2;

  static WobbleChannel draw(Rng& rng) {
    return {rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * M_PI),
            rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * M_PI)};
  }
  double eval(double t) const {
    constexpr double f1 = 0.13, f2 = 0.31;
    return 0.5 * (a1 * std::sin(2.0 * M_PI * f1 * t + p1) +
                  a2 * std::sin(2.0 * M_PI * f2 * t + p2));
  }
};

}  // namespace motion_detail

// Deterministic per (spec, skeleton, subject). Frames = round(duration*fps).
inline PoseSequence generate_motion(const MotionSpec& spec,
                                    const Skeleton& skeleton,
                                    const SubjectProfile& subject) {
  using namespace motion_detail;
  if (!(spec.duration_s > 0.0) || !(spec.fps > 0.0))
    throw InvalidSpec("motion duration and fps must be positive");
  if (spec.noise_amplitude_m < 0.0)
    throw InvalidSpec("noise amplitude must be non-negative");

  const TemplateDef def = template_def(spec.tmpl);
  const double scale = subject.height_cm / kReferenceHeightCm;
  const int frame_count =
      static_cast<int>(std::llround(spec.duration_s * spec.fps));

  // Map skeleton joints onto key-posture slots by name.
  const int J = skeleton.joints();
  std::vector<int> slot(J);
  for (int j = 0; j < J; ++j) slot[j] = b25_index(skeleton.joint_names[j]);

  // Fixed bone lengths from the canonical standing posture.
  const KeyPose canon = standing_pose();
  const int B = skeleton.bones();
  std::vector<double> bone_len(B);
  std::vector<Vec3> dir_a(B), dir_b(B);
  for (int b = 0; b < B; ++b) {
    auto [child, parent] = skeleton.parent_edges[b];
    bone_len[b] =
        (canon[slot[child]] - canon[slot[parent]]).norm() * scale;
    dir_a[b] = (def.a[slot[child]] - def.a[slot[parent]]).normalized();
    dir_b[b] = (def.b[slot[child]] - def.b[slot[parent]]).normalized();
  }

  // Sequence-level random draws: bone wobble, root wander, sway phase.
  Rng rng(derive_seed(spec.seed, "motion",
                      static_cast<std::uint64_t>(spec.tmpl)));
  std::vector<std::array<WobbleChannel, 3>> bone_wobble(B);
  std::vector<double> bone_noise_scale(B);
  for (int b = 0; b < B; ++b) {
    for (auto& ch : bone_wobble[b]) ch = WobbleChannel::draw(rng);
    const BoneClass cls = skeleton.bone_classes[b];
    const bool limb = cls == BoneClass::UpperArm || cls == BoneClass::Forearm ||
                      cls == BoneClass::Thigh || cls == BoneClass::Shin ||
                      cls == BoneClass::Foot || cls == BoneClass::Hand;
    double angular = bone_len[b] > 1e-9
                         ? std::min(spec.noise_amplitude_m / bone_len[b], 0.3)
                         : 0.0;
    bone_noise_scale[b] = angular * (limb ? def.limb_noise : 0.5);
  }
  WobbleChannel root_wx = WobbleChannel::draw(rng);
  WobbleChannel root_wy = WobbleChannel::draw(rng);
  const double sway_phase = rng.uniform(0.0, 2.0 * M_PI);

  const int root_slot = slot[skeleton.root];
  const double mat_cx = kMatSizeX / 2.0;
  const double mat_cy = kMatSizeY / 2.0;

  PoseSequence seq;
  seq.skeleton = skeleton;
  seq.frames.resize(frame_count);
  seq.timestamps.resize(frame_count);

  std::vector<Vec3> pos(J);
  for (int f = 0; f < frame_count; ++f) {
    const double t = static_cast<double>(f) / spec.fps;
    seq.timestamps[f] = t;
    const double phase = 2.0 * M_PI * t / def.period_s + sway_phase;
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * t / def.period_s);

    Vec3 root = (def.a[root_slot] * (1.0 - w) + def.b[root_slot] * w) * scale;
    root.x += mat_cx + def.sway_x * std::sin(phase) +
              spec.noise_amplitude_m * root_wx.eval(t);
    root.y += mat_cy + def.sway_y * std::sin(0.5 * phase) +
              spec.noise_amplitude_m * root_wy.eval(t);
    pos[skeleton.root] = root;

    // parent_edges are listed parents-first, so one pass resolves the tree.
    for (int b = 0; b < B; ++b) {
      auto [child, parent] = skeleton.parent_edges[b];
      Vec3 d = dir_a[b] * (1.0 - w) + dir_b[b] * w;
      const double ns = bone_noise_scale[b];
      if (ns > 0.0) {
        d.x += ns * bone_wobble[b][0].eval(t);
        d.y += ns * bone_wobble[b][1].eval(t);
        d.z += ns * bone_wobble[b][2].eval(t);
      }
      pos[child] = pos[parent] + bone_len[b] * d.normalized();
    }

    // Grounding: translate so contact joints rest at clearance height.
    double shift = 0.0;
    bool first = true;
    for (const auto& anchor : def.anchors) {
      int joint = -1;
      for (int j = 0; j < J; ++j)
        if (slot[j] == anchor.joint) { joint = j; break; }
      if (joint < 0) continue;
      double clearance =
          anchor.fixed_clearance >= 0.0
              ? anchor.fixed_clearance
              : RadiusTable{}.radius_mm(anchor.clearance_class) * 1e-3 * scale;
      double gap = pos[joint].z - clearance;
      if (first || (def.anchor_max ? gap > shift : gap < shift)) {
        shift = gap;
        first = false;
      }
    }
    if (!first) {
      for (auto& p : pos) p.z -= shift;
    }

    seq.frames[f].joints = pos;
  }
  return seq;
}

}  // namespace pressim
