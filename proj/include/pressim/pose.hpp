#pragma once

// Skeleton topologies (COCO 17-keypoint and OpenPose BODY_25), subject body
// parameters, pose sequences, and sequence validation.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pressim/core.hpp"

namespace pressim {

struct SubjectProfile {
  std::string id;
  double mass_kg = 0.0;
  double height_cm = 0.0;
  std::string gender;  // metadata only

  SubjectProfile() = default;
  SubjectProfile(std::string id_, double mass, double height,
                 std::string gender_ = "")
      : id(std::move(id_)), mass_kg(mass), height_cm(height),
        gender(std::move(gender_)) {
    if (!(mass_kg >= 20.0 && mass_kg <= 250.0))
      throw InvalidSpec("subject mass " + std::to_string(mass_kg) +
                        " kg outside [20, 250]");
    if (!(height_cm >= 100.0 && height_cm <= 230.0))
      throw InvalidSpec("subject height " + std::to_string(height_cm) +
                        " cm outside [100, 230]");
  }
};

enum class SkeletonKind : std::uint8_t { Coco17 = 0, Body25 = 1 };

inline int joint_count(SkeletonKind kind) {
  return kind == SkeletonKind::Coco17 ? 17 : 25;
}

// Bone classes index the default capsule radius table.
enum class BoneClass : std::uint8_t {
  HeadNeck,
  Torso,
  UpperArm,
  Forearm,
  Thigh,
  Shin,
  Foot,
  Hand,
  Face,  // degenerate capsule: sphere at the child keypoint
};

// Default capsule radii in millimeters at the 175 cm reference height.
struct RadiusTable {
  double head_neck_mm = 90.0;
  double torso_mm = 140.0;
  double upper_arm_mm = 45.0;
  double forearm_mm = 40.0;
  double thigh_mm = 75.0;
  double shin_mm = 55.0;
  double foot_mm = 40.0;
  double hand_mm = 35.0;
  double face_mm = 90.0;

  double radius_mm(BoneClass c) const {
    switch (c) {
      case BoneClass::HeadNeck: return head_neck_mm;
      case BoneClass::Torso: return torso_mm;
      case BoneClass::UpperArm: return upper_arm_mm;
      case BoneClass::Forearm: return forearm_mm;
      case BoneClass::Thigh: return thigh_mm;
      case BoneClass::Shin: return shin_mm;
      case BoneClass::Foot: return foot_mm;
      case BoneClass::Hand: return hand_mm;
      case BoneClass::Face: return face_mm;
    }
    return 0.0;
  }
};

inline constexpr double kReferenceHeightCm = 175.0;

struct Skeleton {
  SkeletonKind kind = SkeletonKind::Coco17;
  std::vector<std::string> joint_names;
  // (child index, parent index); a tree rooted at the pelvis/hip joint.
  std::vector<std::pair<int, int>> parent_edges;
  std::vector<BoneClass> bone_classes;   // per edge
  std::vector<double> capsule_radii_mm;  // per edge, at reference height
  int root = 0;

  int joints() const { return static_cast<int>(joint_names.size()); }
  int bones() const { return static_cast<int>(parent_edges.size()); }

  int joint_index(const std::string& name) const {
    for (int i = 0; i < joints(); ++i)
      if (joint_names[i] == name) return i;
    throw InvalidSpec("unknown joint name: " + name);
  }
};

namespace detail {

struct BoneSpec {
  const char* child;
  const char* parent;
  BoneClass cls;
};

inline Skeleton make_skeleton(SkeletonKind kind,
                              std::vector<std::string> names,
                              const std::vector<BoneSpec>& bones,
                              const char* root_name,
                              const RadiusTable& table) {
  Skeleton s;
  s.kind = kind;
  s.joint_names = std::move(names);
  for (const auto& b : bones) {
    int child = s.joint_index(b.child);
    int parent = s.joint_index(b.parent);
    s.parent_edges.emplace_back(child, parent);
    s.bone_classes.push_back(b.cls);
    s.capsule_radii_mm.push_back(table.radius_mm(b.cls));
  }
  s.root = s.joint_index(root_name);
  return s;
}

}  // namespace detail

// Fixed topology per kind. Pure: repeated calls are structurally equal.
inline Skeleton build_skeleton(SkeletonKind kind,
                               const RadiusTable& table = RadiusTable{}) {
  using detail::BoneSpec;
  if (kind == SkeletonKind::Coco17) {
    std::vector<std::string> names = {
        "nose", "left_eye", "right_eye", "left_ear", "right_ear",
        "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
        "left_wrist", "right_wrist", "left_hip", "right_hip",
        "left_knee", "right_knee", "left_ankle", "right_ankle"};
    // COCO has no explicit pelvis keypoint; the tree is rooted at left_hip.
    std::vector<BoneSpec> bones = {
        {"right_hip", "left_hip", BoneClass::Torso},
        {"left_knee", "left_hip", BoneClass::Thigh},
        {"right_knee", "right_hip", BoneClass::Thigh},
        {"left_ankle", "left_knee", BoneClass::Shin},
        {"right_ankle", "right_knee", BoneClass::Shin},
        {"left_shoulder", "left_hip", BoneClass::Torso},
        {"right_shoulder", "right_hip", BoneClass::Torso},
        {"left_elbow", "left_shoulder", BoneClass::UpperArm},
        {"right_elbow", "right_shoulder", BoneClass::UpperArm},
        {"left_wrist", "left_elbow", BoneClass::Forearm},
        {"right_wrist", "right_elbow", BoneClass::Forearm},
        {"nose", "left_shoulder", BoneClass::Face},
        {"left_eye", "nose", BoneClass::Face},
        {"right_eye", "nose", BoneClass::Face},
        {"left_ear", "left_eye", BoneClass::Face},
        {"right_ear", "right_eye", BoneClass::Face},
    };
    return detail::make_skeleton(kind, std::move(names), bones, "left_hip",
                                 table);
  }
  std::vector<std::string> names = {
      "nose", "neck", "right_shoulder", "right_elbow", "right_wrist",
      "left_shoulder", "left_elbow", "left_wrist", "mid_hip", "right_hip",
      "right_knee", "right_ankle", "left_hip", "left_knee", "left_ankle",
      "right_eye", "left_eye", "right_ear", "left_ear", "left_big_toe",
      "left_small_toe", "left_heel", "right_big_toe", "right_small_toe",
      "right_heel"};
  std::vector<BoneSpec> bones = {
      {"neck", "mid_hip", BoneClass::Torso},
      {"right_shoulder", "neck", BoneClass::Torso},
      {"left_shoulder", "neck", BoneClass::Torso},
      {"right_elbow", "right_shoulder", BoneClass::UpperArm},
      {"left_elbow", "left_shoulder", BoneClass::UpperArm},
      {"right_wrist", "right_elbow", BoneClass::Forearm},
      {"left_wrist", "left_elbow", BoneClass::Forearm},
      {"right_hip", "mid_hip", BoneClass::Torso},
      {"left_hip", "mid_hip", BoneClass::Torso},
      {"right_knee", "right_hip", BoneClass::Thigh},
      {"left_knee", "left_hip", BoneClass::Thigh},
      {"right_ankle", "right_knee", BoneClass::Shin},
      {"left_ankle", "left_knee", BoneClass::Shin},
      {"right_heel", "right_ankle", BoneClass::Foot},
      {"left_heel", "left_ankle", BoneClass::Foot},
      {"right_big_toe", "right_ankle", BoneClass::Foot},
      {"left_big_toe", "left_ankle", BoneClass::Foot},
      {"right_small_toe", "right_big_toe", BoneClass::Foot},
      {"left_small_toe", "left_big_toe", BoneClass::Foot},
      {"nose", "neck", BoneClass::Face},
      {"right_eye", "nose", BoneClass::Face},
      {"left_eye", "nose", BoneClass::Face},
      {"right_ear", "right_eye", BoneClass::Face},
      {"left_ear", "left_eye", BoneClass::Face},
  };
  return detail::make_skeleton(kind, std::move(names), bones, "mid_hip",
                               table);
}

// One frame of joint positions, meters, world frame: mat plane at Z = 0,
// X across the 28-column axis, Y along the 80-row axis.
struct PoseFrame {
  std::vector<Vec3> joints;

  int joint_count() const { return static_cast<int>(joints.size()); }
};

struct PoseSequence {
  Skeleton skeleton;
  std::vector<PoseFrame> frames;
  std::vector<double> timestamps;  // seconds, strictly increasing

  std::size_t size() const { return frames.size(); }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct PoseViolation {
  enum class Kind { NanOrInf, NonMonotonicTimestamp, BoneLengthDrift, BadJointCount };
  Kind kind;
  int frame = -1;
  int index = -1;  // joint or bone, depending on kind
  std::string detail;
};

struct PoseValidationReport {
  std::vector<PoseViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Reports NaN/Inf joints, timestamp monotonicity violations, and bone-length
// drift above 5% of each bone's mean length. Never mutates the input.
inline PoseValidationReport validate_pose_sequence(const PoseSequence& seq) {
  PoseValidationReport report;
  const int J = seq.skeleton.joints();

  if (seq.frames.size() != seq.timestamps.size()) {
    report.violations.push_back(
        {PoseViolation::Kind::BadJointCount, -1, -1,
         "frame/timestamp count mismatch"});
    return report;
  }

  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const PoseFrame& frame = seq.frames[f];
    if (frame.joint_count() != J) {
      report.violations.push_back({PoseViolation::Kind::BadJointCount,
                                   static_cast<int>(f), frame.joint_count(),
                                   "joint count != skeleton J"});
      continue;
    }
    for (int j = 0; j < J; ++j) {
      if (!frame.joints[j].finite()) {
        report.violations.push_back({PoseViolation::Kind::NanOrInf,
                                     static_cast<int>(f), j,
                                     "non-finite coordinate at joint " +
                                         seq.skeleton.joint_names[j]});
        break;  // one violation per frame is enough to locate it
      }
    }
  }

  for (std::size_t f = 1; f < seq.timestamps.size(); ++f) {
    if (!(seq.timestamps[f] > seq.timestamps[f - 1])) {
      report.violations.push_back({PoseViolation::Kind::NonMonotonicTimestamp,
                                   static_cast<int>(f), -1,
                                   "timestamp not strictly increasing"});
    }
  }

  // Bone-length drift, skipping frames already flagged non-finite.
  const int B = seq.skeleton.bones();
  for (int b = 0; b < B; ++b) {
    auto [child, parent] = seq.skeleton.parent_edges[b];
    double sum = 0.0;
    int n = 0;
    for (const auto& frame : seq.frames) {
      if (frame.joint_count() != J) continue;
      if (!frame.joints[child].finite() || !frame.joints[parent].finite())
        continue;
      sum += (frame.joints[child] - frame.joints[parent]).norm();
      ++n;
    }
    if (n == 0) continue;
    double mean = sum / n;
    if (mean <= 0.0) continue;
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      const auto& frame = seq.frames[f];
      if (frame.joint_count() != J) continue;
      if (!frame.joints[child].finite() || !frame.joints[parent].finite())
        continue;
      double len = (frame.joints[child] - frame.joints[parent]).norm();
      if (std::abs(len - mean) > 0.05 * mean) {
        report.violations.push_back({PoseViolation::Kind::BoneLengthDrift,
                                     static_cast<int>(f), b,
                                     "bone length drift > 5% of mean"});
        break;
      }
    }
  }
  return report;
}

}  // namespace pressim
