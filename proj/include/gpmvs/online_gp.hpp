#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <Eigen/Core>

#include "gpmvs/kernels.hpp"
#include "gpmvs/pose.hpp"

namespace gpmvs {

/// Filter state of the Matern-3/2 latent GP in state-space form. Each latent
/// dimension carries a (value, derivative) state; the columns of `mu` hold them
/// and the 2x2 covariance is shared by every column.
struct OnlineState {
  Eigen::Matrix<double, 2, Eigen::Dynamic> mu;
  Eigen::Matrix2d Sigma;
  KernelSpec spec;
  std::int64_t frame_count = 0;
  std::optional<Pose> last_pose;  // set by step(); used to compute the next pose increment

  Eigen::Index dims() const { return mu.cols(); }
};

/// Evolution operator over a pose-distance increment and the matching process
/// noise Q = Sigma0 - Phi Sigma0 Phi^T.
struct Transition {
  Eigen::Matrix2d Phi;
  Eigen::Matrix2d Q;
};

/// diag(gamma^2, 3 gamma^2 / ell^2), the stationary covariance of the state.
Eigen::Matrix2d steady_state_covariance(const KernelSpec& spec);

/// Drift matrix of the Matern-3/2 state-space model, [[0, 1], [-3/l^2, -2 sqrt(3)/l]].
Eigen::Matrix2d matern32_generator(double ell);

/// Throws UnsupportedKernel unless spec.family is Matern32.
OnlineState init_state(const KernelSpec& spec, Eigen::Index dims);

/// Closed form of exp(F * delta); F has the repeated eigenvalue -sqrt(3)/ell.
Transition transition(double delta, const KernelSpec& spec);

void predict(OnlineState& state, double delta);

/// Measurement update with h = (1, 0)^T and a gain shared by all dimensions.
void update(OnlineState& state, const Eigen::Ref<const Eigen::VectorXd>& y);

Eigen::VectorXd extract_latent(const OnlineState& state);

/// One frame: predict over D[pose, last pose] (skipped for the first frame),
/// update with y and return the fused latent.
Eigen::VectorXd step(OnlineState& state, const Pose& pose, const Eigen::Ref<const Eigen::VectorXd>& y);

/// Binary snapshot: little-endian float64 values
/// (gamma^2, ell, sigma^2, M, frame_count, Sigma row-major, mu row-major),
/// followed by the last pose (R row-major, t) when frame_count > 0.
void save_state(const OnlineState& state, const std::filesystem::path& path);
OnlineState load_state(const std::filesystem::path& path);

}  // namespace gpmvs
