#include "gpmvs/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "gpmvs/error.hpp"

namespace gpmvs {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::TemporalDifference: return "td";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "matern32" || name == "matern") return KernelFamily::Matern32;
  if (name == "exponential" || name == "exp") return KernelFamily::Exponential;
  if (name == "td" || name == "temporal") return KernelFamily::TemporalDifference;
  throw Error(ErrorCode::UnsupportedKernel, "unknown kernel family '" + std::string(name) + "'");
}

void KernelSpec::validate() const {
  if (!(gamma_sq > 0.0) || !std::isfinite(gamma_sq))
    throw Error(ErrorCode::InvalidArgument, "gamma_sq must be positive and finite");
  if (!(ell > 0.0) || !std::isfinite(ell))
    throw Error(ErrorCode::InvalidArgument, "ell must be positive and finite");
  if (!(sigma_sq >= 0.0) || std::isnan(sigma_sq))
    throw Error(ErrorCode::InvalidArgument, "sigma_sq must be nonnegative");
}

double matern32(double d, const KernelSpec& spec) {
  const double r = std::sqrt(3.0) * d / spec.ell;
  return spec.gamma_sq * (1.0 + r) * std::exp(-r);
}

double exponential(double d, const KernelSpec& spec) {
  return spec.gamma_sq * std::exp(-d / spec.ell);
}

double kernel_value(double d, const KernelSpec& spec) {
  switch (spec.family) {
    case KernelFamily::Matern32:
    case KernelFamily::TemporalDifference:
      return matern32(d, spec);
    case KernelFamily::Exponential:
      return exponential(d, spec);
  }
  throw Error(ErrorCode::UnsupportedKernel, "unknown kernel family");
}

double td_distance(std::int64_t i, std::int64_t j) {
  return static_cast<double>(i > j ? i - j : j - i);
}

Eigen::MatrixXd pose_distance_matrix(std::span<const Pose> poses) {
  const auto n = static_cast<Eigen::Index>(poses.size());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      D(i, j) = D(j, i) = pose_distance(poses[i], poses[j]);
  return D;
}

GramMatrix gram_from_distances(const Eigen::MatrixXd& distances, const KernelSpec& spec) {
  spec.validate();
  if (distances.rows() != distances.cols() || distances.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "distance matrix must be square and non-empty");
  const Eigen::Index n = distances.rows();
  GramMatrix g;
  g.C.resize(n, n);
  // Upper triangle only, mirrored, so C is exactly symmetric.
  for (Eigen::Index i = 0; i < n; ++i) {
    g.C(i, i) = spec.gamma_sq;
    for (Eigen::Index j = i + 1; j < n; ++j) g.C(i, j) = g.C(j, i) = kernel_value(distances(i, j), spec);
  }
  return g;
}

GramMatrix gram_matrix(std::span<const Pose> poses, const KernelSpec& spec) {
  if (poses.empty()) throw Error(ErrorCode::InvalidArgument, "gram matrix needs at least one pose");
  for (const Pose& p : poses) {
    if (!is_rotation(p.R) || !p.t.allFinite())
      throw Error(ErrorCode::InvalidPose, "gram matrix input contains an invalid pose");
  }
  if (spec.family == KernelFamily::TemporalDifference) {
    std::vector<std::int64_t> idx(poses.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int64_t>(i);
    GramMatrix g = gram_matrix_indices(idx, spec);
    g.poses.assign(poses.begin(), poses.end());
    return g;
  }
  GramMatrix g = gram_from_distances(pose_distance_matrix(poses), spec);
  g.poses.assign(poses.begin(), poses.end());
  return g;
}

GramMatrix gram_matrix_indices(std::span<const std::int64_t> indices, const KernelSpec& spec) {
  if (indices.empty()) throw Error(ErrorCode::InvalidArgument, "gram matrix needs at least one index");
  const auto n = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) D(i, j) = D(j, i) = td_distance(indices[i], indices[j]);
  return gram_from_distances(D, spec);
}

}  // namespace gpmvs
