#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gpmvs/pose.hpp"

namespace gpmvs {

enum class KernelFamily { Matern32, Exponential, TemporalDifference };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

/// Kernel family plus hyperparameters: magnitude gamma_sq, length-scale ell and
/// the observation noise variance sigma_sq used by the regression model.
struct KernelSpec {
  KernelFamily family = KernelFamily::Matern32;
  double gamma_sq = 1.0;
  double ell = 1.0;
  double sigma_sq = 0.0;

  /// Throws InvalidArgument unless gamma_sq > 0, ell > 0 and sigma_sq >= 0.
  void validate() const;

  /// Values learned jointly with the encoder/decoder on the training set.
  static KernelSpec trained() { return {KernelFamily::Matern32, 13.82, 1.098, 1.443}; }
};

double matern32(double d, const KernelSpec& spec);
double exponential(double d, const KernelSpec& spec);

/// Covariance as a function of distance for the given family. The temporal
/// difference family uses the Matern-3/2 form on frame-index distance.
double kernel_value(double d, const KernelSpec& spec);

double td_distance(std::int64_t i, std::int64_t j);

struct GramMatrix {
  Eigen::MatrixXd C;
  std::vector<Pose> poses;  // empty when built from indices or raw distances
};

/// C_ij = kappa(D[P_i, P_j]). For the TemporalDifference family the poses'
/// positions in the list act as frame indices.
GramMatrix gram_matrix(std::span<const Pose> poses, const KernelSpec& spec);
GramMatrix gram_matrix_indices(std::span<const std::int64_t> indices, const KernelSpec& spec);

/// Kernel applied to a precomputed symmetric distance matrix.
GramMatrix gram_from_distances(const Eigen::MatrixXd& distances, const KernelSpec& spec);

Eigen::MatrixXd pose_distance_matrix(std::span<const Pose> poses);

}  // namespace gpmvs
