#pragma once

// Capsule-union body geometry. Each bone carries one capsule between its
// joint positions; face keypoints carry spheres (degenerate capsules) so the
// head leaves a footprint in supine poses. Radii scale linearly with subject
// height; mass is carried by the rigid body, not the geometry.

#include <vector>

#include "pressim/core.hpp"
#include "pressim/pose.hpp"

namespace pressim {

struct Capsule {
  Vec3 a;          // endpoint, meters
  Vec3 b;          // endpoint, meters (== a for spheres)
  double radius;   // meters
};

struct BodySolid {
  std::vector<Capsule> capsules;
  double total_mass = 0.0;  // kilograms
};

inline BodySolid body_geometry(const PoseFrame& pose, const Skeleton& skeleton,
                               const SubjectProfile& subject) {
  if (pose.joint_count() != skeleton.joints())
    throw DimensionMismatch("pose has " + std::to_string(pose.joint_count()) +
                            " joints, skeleton expects " +
                            std::to_string(skeleton.joints()));
  const double scale = subject.height_cm / kReferenceHeightCm;
  BodySolid body;
  body.total_mass = subject.mass_kg;
  body.capsules.reserve(skeleton.bones());
  for (int b = 0; b < skeleton.bones(); ++b) {
    auto [child, parent] = skeleton.parent_edges[b];
    const double r = skeleton.capsule_radii_mm[b] * 1e-3 * scale;
    if (skeleton.bone_classes[b] == BoneClass::Face) {
      // Sphere at the keypoint.
      body.capsules.push_back({pose.joints[child], pose.joints[child], r});
    } else {
      body.capsules.push_back({pose.joints[child], pose.joints[parent], r});
    }
  }
  return body;
}

}  // namespace pressim
