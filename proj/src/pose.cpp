#include "gpmvs/pose.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "gpmvs/error.hpp"

namespace gpmvs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotARotation: return "NotARotation";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::BatchTooLarge: return "BatchTooLarge";
    case ErrorCode::UnsupportedKernel: return "UnsupportedKernel";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).norm();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

void validate_rotation(const Mat3& R) {
  if (!R.allFinite()) throw Error(ErrorCode::NotARotation, "rotation has non-finite entries");
  const double ortho = (R.transpose() * R - Mat3::Identity()).norm();
  const double det = R.determinant();
  if (ortho > kRotationTolerance || std::abs(det - 1.0) > kRotationTolerance) {
    std::ostringstream os;
    os << "not a rotation: |R^T R - I|_F = " << ortho << ", det = " << det;
    throw Error(ErrorCode::NotARotation, os.str());
  }
}

Pose Pose::checked(const Mat3& R, const Vec3& t) {
  validate_rotation(R);
  if (!t.allFinite()) throw Error(ErrorCode::InvalidPose, "translation has non-finite entries");
  return Pose{R, t};
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0) U.col(2) *= -1.0;
  return U * V.transpose();
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double rotation_term(const Mat3& Ri, const Mat3& Rj) {
  // For rotations 2/3 tr(I - Ri^T Rj) = |Ri - Rj|_F^2 / 3. The difference form
  // is exactly symmetric and exactly zero when Ri == Rj.
  return std::min((Ri - Rj).squaredNorm() / 3.0, 8.0 / 3.0);
}

double pose_distance(const Pose& a, const Pose& b) {
  return std::sqrt((a.t - b.t).squaredNorm() + rotation_term(a.R, b.R));
}

RelativePose relative_pose(const Pose& ref, const Pose& nbr) {
  const Mat3 Rn_t = nbr.R.transpose();
  return RelativePose{Rn_t * ref.R, Rn_t * (ref.t - nbr.t)};
}

double rotation_angle(const Mat3& Ri, const Mat3& Rj) {
  const double trace = Ri.cwiseProduct(Rj).sum();
  return std::acos(std::clamp((trace - 1.0) / 2.0, -1.0, 1.0));
}

}  // namespace gpmvs
