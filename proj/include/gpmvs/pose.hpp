#pragma once

#include <Eigen/Core>

namespace gpmvs {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kRotationTolerance = 1e-9;

/// World-from-camera rigid transform. A camera-frame point x maps to the world
/// as R * x + t, so t is the camera center in world coordinates.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  /// Throws NotARotation if R is not a proper rotation within tolerance.
  static Pose checked(const Mat3& R, const Vec3& t);

  Vec3 to_world(const Vec3& x_cam) const { return R * x_cam + t; }
  Vec3 to_camera(const Vec3& x_world) const { return R.transpose() * (x_world - t); }
};

/// Maps reference-camera coordinates to neighbour-camera coordinates:
/// x_nbr = R * x_ref + t.
struct RelativePose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x_ref) const { return R * x_ref + t; }
};

/// Throws Error(NotARotation) unless R^T R = I and det R = 1 within 1e-9.
void validate_rotation(const Mat3& R);
bool is_rotation(const Mat3& R, double tol = kRotationTolerance);

/// Nearest rotation in the Frobenius sense (SVD projection). Only used when a
/// caller explicitly asks for it; no function in the library re-orthonormalizes
/// silently.
Mat3 orthonormalize(const Mat3& R);

/// Rotation of `angle` radians about `axis` (need not be unit length).
Mat3 axis_angle(const Vec3& axis, double angle);

/// sqrt(|t_i - t_j|^2 + 2/3 tr(I - R_i^T R_j)).
double pose_distance(const Pose& a, const Pose& b);

/// The rotational part 2/3 tr(I - R_i^T R_j), always within [0, 8/3].
double rotation_term(const Mat3& Ri, const Mat3& Rj);

RelativePose relative_pose(const Pose& ref, const Pose& nbr);

/// Geodesic angle between two rotations, in [0, pi].
double rotation_angle(const Mat3& Ri, const Mat3& Rj);

}  // namespace gpmvs
