#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "gpmvs/batch_gp.hpp"
#include "gpmvs/error.hpp"
#include "oracles.hpp"

using namespace gpmvs;

namespace {

std::vector<Pose> random_poses(std::mt19937_64& rng, int n) {
  std::vector<Pose> poses;
  for (int i = 0; i < n; ++i) poses.push_back(oracle::random_pose(rng));
  return poses;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd Y(rows, cols);
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) = n(rng);
  return Y;
}

}  // namespace

TEST_CASE("single frame posterior is the closed-form shrinkage") {
  const KernelSpec spec{KernelFamily::Matern32, 2.0, 1.0, 0.5};
  const GramMatrix g = gram_matrix(std::vector<Pose>{Pose{}}, spec);
  Eigen::MatrixXd y(1, 3);
  y << 1.0, -2.0, 4.0;
  const BatchPosterior post = batch_posterior(g, y, spec.sigma_sq);
  CHECK((post.mean - (2.0 / 2.5) * y).norm() < 1e-14);
  CHECK(post.var(0) == doctest::Approx(2.0 * 0.5 / 2.5).epsilon(1e-14));
}

TEST_CASE("trained hyperparameters shrink a single frame by 13.82 / 15.263") {
  const KernelSpec spec = KernelSpec::trained();
  const GramMatrix g = gram_matrix(std::vector<Pose>{Pose{}}, spec);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 4, 3.0);
  const BatchPosterior post = batch_posterior(g, y, spec.sigma_sq);
  CHECK(post.mean(0, 0) / 3.0 == doctest::Approx(0.905457642665269).epsilon(1e-12));
}

TEST_CASE("noiseless posterior interpolates exactly") {
  std::mt19937_64 rng(9);
  const KernelSpec spec{KernelFamily::Matern32, 1.3, 0.8, 0.0};
  const auto poses = random_poses(rng, 12);
  const Eigen::MatrixXd Y = random_matrix(rng, 12, 5);
  const BatchPosterior post = batch_posterior(gram_matrix(poses, spec), Y, 0.0);
  CHECK(post.mean == Y);
  CHECK(post.var.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch posterior matches the dense inverse oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 9;
    const KernelSpec spec{trial % 2 ? KernelFamily::Exponential : KernelFamily::Matern32, 0.5 + 0.1 * trial,
                          0.4 + 0.05 * trial, 0.05 + 0.03 * trial};
    const auto poses = random_poses(rng, n);
    const GramMatrix g = gram_matrix(poses, spec);
    const Eigen::MatrixXd Y = random_matrix(rng, n, 7);
    const BatchPosterior post = batch_posterior(g, Y, spec.sigma_sq);
    const Eigen::MatrixXd mean = oracle::dense_posterior_mean(g.C, Y, spec.sigma_sq);
    REQUIRE((post.mean - mean).norm() <= 1e-10 * std::max(1.0, mean.norm()));
    REQUIRE((post.var - oracle::dense_posterior_var(g.C, spec.sigma_sq)).cwiseAbs().maxCoeff() <= 1e-10);
    REQUIRE(post.var.minCoeff() >= -1e-8);
    REQUIRE(post.var.maxCoeff() <= spec.gamma_sq + 1e-8);
  }
}

TEST_CASE("posterior variance does not depend on Y; columns solve independently") {
  std::mt19937_64 rng(4);
  const KernelSpec spec{KernelFamily::Matern32, 1.0, 1.0, 0.3};
  const GramMatrix g = gram_matrix(random_poses(rng, 10), spec);
  const Eigen::MatrixXd Y1 = random_matrix(rng, 10, 6);
  const Eigen::MatrixXd Y2 = random_matrix(rng, 10, 6);
  const BatchPosterior a = batch_posterior(g, Y1, spec.sigma_sq);
  const BatchPosterior b = batch_posterior(g, Y2, spec.sigma_sq);
  CHECK(a.var == b.var);
  for (Eigen::Index k = 0; k < Y1.cols(); ++k) {
    const BatchPosterior single = batch_posterior(g, Y1.col(k), spec.sigma_sq);
    CHECK((single.mean.col(0) - a.mean.col(k)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("permuting frames permutes the posterior") {
  std::mt19937_64 rng(8);
  const KernelSpec spec{KernelFamily::Matern32, 1.7, 0.9, 0.2};
  auto poses = random_poses(rng, 9);
  const Eigen::MatrixXd Y = random_matrix(rng, 9, 4);
  const BatchPosterior base = batch_posterior(gram_matrix(poses, spec), Y, spec.sigma_sq);

  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Pose> pposes;
  Eigen::MatrixXd pY(9, 4);
  for (int i = 0; i < 9; ++i) {
    pposes.push_back(poses[perm[i]]);
    pY.row(i) = Y.row(perm[i]);
  }
  const BatchPosterior permuted = batch_posterior(gram_matrix(pposes, spec), pY, spec.sigma_sq);
  for (int i = 0; i < 9; ++i) {
    CHECK((permuted.mean.row(i) - base.mean.row(perm[i])).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(permuted.var(i) == doctest::Approx(base.var(perm[i])).epsilon(1e-12));
  }
}

TEST_CASE("isolated frames tend to the single-frame shrinkage") {
  const KernelSpec spec{KernelFamily::Matern32, 2.0, 1.0, 0.7};
  std::vector<Pose> poses;
  for (int i = 0; i < 4; ++i) poses.push_back(Pose{Mat3::Identity(), Vec3(40.0 * i, 0, 0)});
  Eigen::MatrixXd Y(4, 2);
  Y << 1, 2, -3, 4, 5, -6, 7, 8;
  const BatchPosterior post = batch_posterior(gram_matrix(poses, spec), Y, spec.sigma_sq);
  CHECK((post.mean - (2.0 / 2.7) * Y).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("duplicate poses without noise need jitter or fail") {
  const KernelSpec spec{KernelFamily::Matern32, 1.0, 1.0, 0.0};
  const GramMatrix g = gram_matrix(std::vector<Pose>{Pose{}, Pose{}}, spec);
  Eigen::MatrixXd Y(2, 1);
  Y << 1.0, 3.0;
  try {
    const BatchPosterior post = batch_posterior(g, Y, 0.0);
    // A rank-deficient C may factorize once jittered; the fused value is then
    // the average of the duplicates.
    CHECK(post.jitter > 0.0);
    CHECK(post.mean(0, 0) == doctest::Approx(2.0).epsilon(1e-3));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FactorizationFailure);
  }

  // Noisy duplicates are well posed.
  const BatchPosterior noisy = batch_posterior(g, Y, 1.0);
  CHECK(noisy.jitter == 0.0);
  CHECK(noisy.mean(0, 0) == doctest::Approx(noisy.mean(1, 0)));
}

TEST_CASE("indefinite input fails after jitter escalation") {
  GramMatrix g;
  g.C = Eigen::MatrixXd::Identity(2, 2);
  g.C(0, 1) = g.C(1, 0) = 3.0;
  try {
    batch_posterior(g, Eigen::MatrixXd::Ones(2, 1), 0.0);
    FAIL("expected FactorizationFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FactorizationFailure);
  }
}

TEST_CASE("batch cap and shape errors") {
  const KernelSpec spec{KernelFamily::Matern32, 1.0, 1.0, 0.1};
  std::vector<Pose> poses(6);
  for (int i = 0; i < 6; ++i) poses[i].t.x() = i;
  const GramMatrix g = gram_matrix(poses, spec);
  BatchOptions opts;
  opts.max_frames = 5;
  try {
    batch_posterior(g, Eigen::MatrixXd::Zero(6, 2), 0.1, opts);
    FAIL("expected BatchTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BatchTooLarge);
  }
  try {
    batch_posterior(g, Eigen::MatrixXd::Zero(5, 2), 0.1);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("log marginal likelihood") {
  const KernelSpec spec{KernelFamily::Matern32, 1.5, 1.0, 0.5};
  const GramMatrix g1 = gram_matrix(std::vector<Pose>{Pose{}}, spec);
  CHECK(log_marginal_likelihood(g1, Eigen::MatrixXd::Zero(1, 1), spec.sigma_sq) ==
        doctest::Approx(-0.5 * std::log(2.0) - 0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-14));

  std::mt19937_64 rng(31);
  for (int n = 1; n <= 5; ++n) {
    const GramMatrix g = gram_matrix(random_poses(rng, n), spec);
    const Eigen::MatrixXd Y = random_matrix(rng, n, 3);
    const double expected = oracle::dense_log_marginal(g.C, Y, spec.sigma_sq);
    CHECK(log_marginal_likelihood(g, Y, spec.sigma_sq) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("log marginal likelihood prefers the generating noise level") {
  // Monte-Carlo smoke test: data drawn from the model with sigma^2 = 0.5 score
  // higher at 0.5 than at grossly misspecified noise levels.
  const KernelSpec spec{KernelFamily::Matern32, 1.0, 1.0, 0.5};
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto poses = random_poses(rng, 15);
    const GramMatrix g = gram_matrix(poses, spec);
    Eigen::MatrixXd A = g.C;
    A.diagonal().array() += spec.sigma_sq;
    const Eigen::MatrixXd L = A.llt().matrixL();
    const Eigen::MatrixXd Y = L * random_matrix(rng, 15, 64);
    const double truth = log_marginal_likelihood(g, Y, 0.5);
    if (truth > log_marginal_likelihood(g, Y, 0.005) && truth > log_marginal_likelihood(g, Y, 50.0)) ++wins;
  }
  CHECK(wins >= 95);
}
