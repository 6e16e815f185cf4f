#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "gpmvs/kernels.hpp"

namespace gpmvs {

/// Rows are frames, columns are latent dimensions.
using LatentMatrix = Eigen::MatrixXd;

inline constexpr std::size_t kDefaultBatchCap = 512;

struct BatchPosterior {
  Eigen::MatrixXd mean;  // N x M fused latents
  Eigen::VectorXd var;   // per-frame marginal variance, shared by all M outputs
  double jitter = 0.0;   // diagonal term added on top of sigma_sq to factorize
};

struct BatchOptions {
  std::size_t max_frames = kDefaultBatchCap;
  double initial_jitter = 1e-10;  // relative to the largest diagonal of C
  int max_retries = 4;
};

/// E[Z] = C (C + s I)^-1 Y and V[Z] = diag(C - C (C + s I)^-1 C), s = sigma_sq.
/// One Cholesky factorization serves every latent column. If it fails the
/// diagonal is inflated by initial_jitter * gamma^2, then x10 per retry.
BatchPosterior batch_posterior(const GramMatrix& gram, const LatentMatrix& Y, double sigma_sq,
                               const BatchOptions& opts = {});

/// Sum over the M columns of the Gaussian log marginal likelihood
/// -1/2 y^T A^-1 y - 1/2 log det A - N/2 log 2 pi, with A = C + sigma_sq I.
double log_marginal_likelihood(const GramMatrix& gram, const LatentMatrix& Y, double sigma_sq,
                               const BatchOptions& opts = {});

}  // namespace gpmvs
