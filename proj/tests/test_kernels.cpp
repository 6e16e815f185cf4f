#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gpmvs/error.hpp"
#include "gpmvs/kernels.hpp"
#include "oracles.hpp"

using namespace gpmvs;

TEST_CASE("matern32 values") {
  const KernelSpec unit{KernelFamily::Matern32, 1.0, 1.0, 0.0};
  CHECK(matern32(0.0, unit) == 1.0);
  // (1 + sqrt 3) exp(-sqrt 3)
  CHECK(matern32(1.0, unit) == doctest::Approx(0.4833577245965077).epsilon(1e-14));
  CHECK(matern32(0.0, KernelSpec::trained()) == 13.82);
  for (double d : {0.1, 0.5, 2.0, 7.0}) CHECK(matern32(d, unit) > 0.0);
}

TEST_CASE("exponential values") {
  const KernelSpec unit{KernelFamily::Exponential, 1.0, 1.0, 0.0};
  CHECK(exponential(0.0, unit) == 1.0);
  CHECK(exponential(1.0, unit) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
  CHECK(exponential(1e6, unit) == 0.0);
}

TEST_CASE("td_distance") {
  CHECK(td_distance(5, 5) == 0.0);
  CHECK(td_distance(3, 7) == 4.0);
  CHECK(td_distance(7, 3) == 4.0);
}

TEST_CASE("kernels decay monotonically and differ in smoothness at zero") {
  const KernelSpec m{KernelFamily::Matern32, 2.5, 0.7, 0.0};
  const KernelSpec e{KernelFamily::Exponential, 2.5, 0.7, 0.0};
  double prev_m = kernel_value(0.0, m), prev_e = kernel_value(0.0, e);
  for (double d = 0.01; d < 20.0; d += 0.01) {
    REQUIRE(kernel_value(d, m) <= prev_m);
    REQUIRE(kernel_value(d, e) <= prev_e);
    prev_m = kernel_value(d, m);
    prev_e = kernel_value(d, e);
  }
  const double h = 1e-6;
  CHECK(std::abs((matern32(h, m) - matern32(0.0, m)) / h) < 1e-4);
  CHECK((exponential(h, e) - exponential(0.0, e)) / h == doctest::Approx(-2.5 / 0.7).epsilon(1e-5));
}

TEST_CASE("KernelSpec validation") {
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern32, 0.0, 1.0, 0.0}.validate()), Error);
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern32, 1.0, -1.0, 0.0}.validate()), Error);
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern32, 1.0, 1.0, -0.1}.validate()), Error);
  CHECK_NOTHROW(KernelSpec::trained().validate());
  CHECK(parse_kernel_family("td") == KernelFamily::TemporalDifference);
  CHECK_THROWS_AS(parse_kernel_family("rbf"), Error);
}

TEST_CASE("gram_matrix small cases") {
  const KernelSpec unit{KernelFamily::Matern32, 1.0, 1.0, 0.0};
  const Pose p{oracle::rot_z(0.3), Vec3(1, 2, 3)};

  std::vector<Pose> one{p};
  const GramMatrix g1 = gram_matrix(one, unit);
  CHECK(g1.C.rows() == 1);
  CHECK(g1.C(0, 0) == 1.0);

  std::vector<Pose> twins{p, p};
  CHECK((gram_matrix(twins, unit).C - Eigen::MatrixXd::Ones(2, 2)).norm() == 0.0);

  std::vector<Pose> line{Pose{Mat3::Identity(), Vec3(0, 0, 0)}, Pose{Mat3::Identity(), Vec3(1, 0, 0)},
                         Pose{Mat3::Identity(), Vec3(2, 0, 0)}};
  const GramMatrix g3 = gram_matrix(line, unit);
  CHECK(g3.C(0, 2) == doctest::Approx(0.13973135019231467).epsilon(1e-14));
  CHECK(g3.C(0, 1) == doctest::Approx(0.4833577245965077).epsilon(1e-14));
  CHECK(g3.poses.size() == 3);
}

TEST_CASE("gram_matrix rejects invalid poses") {
  std::vector<Pose> bad{Pose{2.0 * Mat3::Identity(), Vec3::Zero()}};
  try {
    gram_matrix(bad, KernelSpec{});
    FAIL("expected InvalidPose");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidPose);
  }
  CHECK_THROWS_AS(gram_matrix(std::vector<Pose>{}, KernelSpec{}), Error);
}

TEST_CASE("temporal difference gram uses frame indices") {
  const KernelSpec td{KernelFamily::TemporalDifference, 1.5, 2.0, 0.0};
  std::mt19937_64 rng(2);
  std::vector<Pose> poses;
  for (int i = 0; i < 6; ++i) poses.push_back(oracle::random_pose(rng));
  const GramMatrix g = gram_matrix(poses, td);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(g.C(i, j) == doctest::Approx(oracle::matern32(std::abs(i - j), 1.5, 2.0)));
}

TEST_CASE("gram matrices are symmetric, PSD and translation invariant") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(1, 50);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = count(rng);
    std::vector<Pose> poses;
    for (int i = 0; i < n; ++i) poses.push_back(oracle::random_pose(rng));
    const Vec3 shift(u(rng), u(rng), u(rng));
    std::vector<Pose> shifted = poses;
    for (auto& p : shifted) p.t += shift;

    for (KernelFamily fam : {KernelFamily::Matern32, KernelFamily::Exponential}) {
      const KernelSpec spec{fam, 0.5 + trial * 0.05, 0.3 + trial * 0.02, 0.0};
      const GramMatrix g = gram_matrix(poses, spec);
      REQUIRE((g.C - g.C.transpose()).norm() == 0.0);
      REQUIRE((g.C.diagonal().array() == spec.gamma_sq).all());
      const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g.C).eigenvalues().minCoeff();
      REQUIRE(min_eig >= -1e-8 * spec.gamma_sq);
      REQUIRE((gram_matrix(shifted, spec).C - g.C).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}
