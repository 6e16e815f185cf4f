#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gpmvs/error.hpp"
#include "gpmvs/online_gp.hpp"
#include "oracles.hpp"

using namespace gpmvs;

namespace {

Eigen::MatrixXd matern_gram_1d(const std::vector<double>& x, double gamma_sq, double ell) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) C(i, j) = oracle::matern32(std::abs(x[i] - x[j]), gamma_sq, ell);
  return C;
}

}  // namespace

TEST_CASE("init_state") {
  const OnlineState s = init_state(KernelSpec{KernelFamily::Matern32, 1.0, 1.0, 0.0}, 5);
  CHECK(s.mu.isZero(0.0));
  CHECK(s.Sigma(0, 0) == 1.0);
  CHECK(s.Sigma(1, 1) == 3.0);
  CHECK(s.Sigma(0, 1) == 0.0);
  CHECK(s.frame_count == 0);

  const OnlineState t = init_state(KernelSpec::trained(), 3);
  CHECK(t.Sigma(1, 1) == doctest::Approx(34.38940149501826).epsilon(1e-14));
  CHECK(extract_latent(t).isZero(0.0));

  try {
    init_state(KernelSpec{KernelFamily::Exponential, 1.0, 1.0, 0.0}, 2);
    FAIL("expected UnsupportedKernel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedKernel);
  }
}

TEST_CASE("transition closed form") {
  const KernelSpec unit{KernelFamily::Matern32, 1.0, 1.0, 0.0};
  const Transition zero = transition(0.0, unit);
  CHECK(zero.Phi == Eigen::Matrix2d::Identity());
  CHECK(zero.Q.cwiseAbs().maxCoeff() == 0.0);

  // expm([[0, 1], [-3, -2 sqrt 3]])
  Eigen::Matrix2d expected;
  expected << 0.48335772459650765, 0.1769212063177642, -0.53076361895329261, -0.12951531196097924;
  CHECK((transition(1.0, unit).Phi - expected).norm() < 1e-12);

  const Transition far = transition(1e3, unit);
  CHECK(far.Phi.norm() < 1e-300);
  CHECK((far.Q - steady_state_covariance(unit)).norm() < 1e-12);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ell(0.05, 10.0), delta(0.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const KernelSpec spec{KernelFamily::Matern32, 1.0 + i * 0.1, ell(rng), 0.0};
    const double d = delta(rng);
    const Transition tr = transition(d, spec);
    REQUIRE((tr.Phi - oracle::expm(matern32_generator(spec.ell) * d)).norm() <= 1e-10);
    const Eigen::Matrix2d S0 = steady_state_covariance(spec);
    REQUIRE((tr.Phi * S0 * tr.Phi.transpose() + tr.Q - S0).norm() <= 1e-10 * S0.norm());
  }
  CHECK_THROWS_AS(transition(-1.0, unit), Error);
}

TEST_CASE("predict") {
  const KernelSpec spec{KernelFamily::Matern32, 1.0, 1.0, 0.0};
  OnlineState s = init_state(spec, 3);
  s.mu.row(0) << 1, 2, 3;
  s.mu.row(1) << 0, 0, 1;
  s.Sigma << 0.5, 0.1, 0.1, 0.7;
  const OnlineState before = s;
  predict(s, 0.0);
  CHECK(s.mu == before.mu);
  CHECK(s.Sigma == before.Sigma);

  predict(s, 1.0);
  const Eigen::Matrix2d Phi = oracle::expm(matern32_generator(1.0));
  CHECK((s.mu - Phi * before.mu).norm() < 1e-12);
  const Eigen::Matrix2d S0 = steady_state_covariance(spec);
  CHECK((s.Sigma - (Phi * before.Sigma * Phi.transpose() + S0 - Phi * S0 * Phi.transpose())).norm() < 1e-12);

  OnlineState fresh = init_state(KernelSpec{KernelFamily::Matern32, 2.0, 0.6, 0.0}, 2);
  for (double d : {0.01, 0.5, 3.0, 40.0}) {
    predict(fresh, d);
    CHECK((fresh.Sigma - steady_state_covariance(fresh.spec)).norm() <= 1e-12);
  }
}

TEST_CASE("update") {
  OnlineState s = init_state(KernelSpec{KernelFamily::Matern32, 1.0, 1.0, 1.0}, 3);
  Eigen::VectorXd y(3);
  y << 2.0, -4.0, 1.0;
  update(s, y);
  CHECK((extract_latent(s) - 0.5 * y).norm() < 1e-15);
  CHECK(s.mu.row(1).isZero(0.0));
  CHECK(s.Sigma(0, 0) == doctest::Approx(0.5));
  CHECK(s.Sigma(1, 1) == doctest::Approx(3.0));

  OnlineState exact = init_state(KernelSpec{KernelFamily::Matern32, 1.0, 1.0, 0.0}, 3);
  update(exact, y);
  CHECK(extract_latent(exact) == y);

  OnlineState vague = init_state(KernelSpec{KernelFamily::Matern32, 1.0, 1.0,
                                            std::numeric_limits<double>::infinity()}, 3);
  update(vague, y);
  CHECK(extract_latent(vague).isZero(0.0));
  CHECK(vague.Sigma == steady_state_covariance(vague.spec));

  try {
    update(s, Eigen::VectorXd::Zero(4));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }

  // Noiseless observation twice at the same pose leaves a zero innovation variance.
  try {
    predict(exact, 0.0);
    update(exact, y);
    FAIL("expected a degenerate update error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FactorizationFailure);
  }
}

TEST_CASE("online filtering equals batch regression on each prefix along a line") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> spacing(0.01, 5.0);
  std::normal_distribution<double> normal;
  const KernelSpec spec{KernelFamily::Matern32, 1.7, 1.3, 0.4};
  const int N = 20, M = 16;
  std::vector<double> x{0.0};
  for (int i = 1; i < N; ++i) x.push_back(x.back() + spacing(rng));
  Eigen::MatrixXd Y(N, M);
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) = normal(rng);

  OnlineState s = init_state(spec, M);
  for (int n = 0; n < N; ++n) {
    const Eigen::VectorXd fused = step(s, Pose{Mat3::Identity(), Vec3(x[n], 0, 0)}, Y.row(n).transpose());
    const std::vector<double> prefix(x.begin(), x.begin() + n + 1);
    const Eigen::MatrixXd mean =
        oracle::dense_posterior_mean(matern_gram_1d(prefix, spec.gamma_sq, spec.ell), Y.topRows(n + 1), spec.sigma_sq);
    const Eigen::VectorXd expected = mean.row(n).transpose();
    REQUIRE((fused - expected).norm() <= 1e-8 * expected.norm());
  }
  CHECK(s.frame_count == N);
}

TEST_CASE("repeated pose stacks observations like the batch posterior") {
  const KernelSpec spec{KernelFamily::Matern32, 1.0, 1.0, 1.0};
  OnlineState s = init_state(spec, 1);
  Eigen::VectorXd y1(1), y2(1);
  y1 << 1.0;
  y2 << 3.0;
  step(s, Pose{}, y1);
  const double fused = step(s, Pose{}, y2)(0);
  Eigen::MatrixXd Y(2, 1);
  Y << 1.0, 3.0;
  const Eigen::MatrixXd mean = oracle::dense_posterior_mean(Eigen::MatrixXd::Ones(2, 2), Y, 1.0);
  CHECK(fused == doctest::Approx(mean(1, 0)).epsilon(1e-12));
  CHECK(fused == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("covariance stays symmetric PSD over long random runs") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> delta(0.0, 3.0), noise(0.0, 2.0);
  OnlineState s = init_state(KernelSpec{KernelFamily::Matern32, 2.0, 0.7, 0.3}, 2);
  for (int i = 0; i < 10000; ++i) {
    s.spec.sigma_sq = noise(rng);
    predict(s, delta(rng));
    update(s, Eigen::Vector2d(noise(rng), -noise(rng)));
    REQUIRE(s.Sigma(0, 1) == s.Sigma(1, 0));
    const auto eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(s.Sigma).eigenvalues();
    REQUIRE(eig.minCoeff() >= -1e-10 * 2.0);
  }
}

TEST_CASE("state snapshots round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "gpmvs_state_test";
  std::filesystem::create_directories(dir);
  OnlineState s = init_state(KernelSpec{KernelFamily::Matern32, 1.2, 0.9, 0.4}, 4);
  step(s, Pose{oracle::rot_z(0.3), Vec3(1, 2, 3)}, Eigen::Vector4d(1, 2, 3, 4));
  step(s, Pose{oracle::rot_z(0.4), Vec3(1, 2, 3.5)}, Eigen::Vector4d(2, 2, 2, 2));
  save_state(s, dir / "s.bin");
  CHECK(std::filesystem::file_size(dir / "s.bin") == 8 * (9 + 2 * 4 + 12));
  const OnlineState r = load_state(dir / "s.bin");
  CHECK(r.mu == s.mu);
  CHECK(r.Sigma == s.Sigma);
  CHECK(r.frame_count == 2);
  CHECK(r.spec.gamma_sq == 1.2);
  REQUIRE(r.last_pose.has_value());
  CHECK(r.last_pose->R == s.last_pose->R);

  const OnlineState fresh = init_state(KernelSpec{KernelFamily::Matern32, 1.0, 1.0, 0.0}, 2);
  save_state(fresh, dir / "f.bin");
  CHECK(std::filesystem::file_size(dir / "f.bin") == 8 * (9 + 4));
  CHECK_FALSE(load_state(dir / "f.bin").last_pose.has_value());

  std::filesystem::resize_file(dir / "s.bin", 20);
  CHECK_THROWS_AS(load_state(dir / "s.bin"), Error);
  std::filesystem::remove_all(dir);
}
