#include <catch2/catch_amalgamated.hpp>

#include <Eigen/SVD>

#include "mvreg/motion_graph.hpp"
#include "mvreg/recovery.hpp"
#include "mvreg/rng.hpp"

using namespace mvreg;

namespace {

std::vector<RigidMotion> random_motions(Rng& rng, std::size_t n) {
  std::vector<RigidMotion> motions{RigidMotion::identity()};
  for (std::size_t i = 1; i < n; ++i) motions.push_back(rng.rigid_motion());
  return motions;
}

// Rank-4 factors of an exact matrix, straight from its SVD.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> factorize(const Eigen::MatrixXd& x) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd u = svd.matrixU().leftCols(4);
  return {u, u.transpose() * x};
}

}  // namespace

TEST_CASE("recover_global_motions round-trips exact matrices") {
  Rng rng(81);
  for (std::size_t n : {2, 4, 9}) {
    const std::vector<RigidMotion> motions = random_motions(rng, n);
    const Eigen::MatrixXd x = exact_matrix(motions);
    const auto [u, v] = factorize(x);
    const std::vector<RigidMotion> recovered = recover_global_motions(u, v, n);

    REQUIRE(recovered.size() == n);
    CHECK(recovered[0].homogeneous() == Eigen::Matrix4d::Identity());
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(rotation_geodesic(recovered[i], motions[i]) < 1e-8);
      CHECK((recovered[i].translation() - motions[i].translation()).norm() <
            1e-8);
    }
    // Rebuilding the exact matrix from the recovered motions reproduces UV.
    const Eigen::MatrixXd rebuilt = exact_matrix(recovered);
    CHECK((rebuilt - u * v).norm() / x.norm() < 1e-6);
  }
}

TEST_CASE("recovery is invariant to uniform scaling of X") {
  Rng rng(82);
  const std::size_t n = 5;
  const std::vector<RigidMotion> motions = random_motions(rng, n);
  const Eigen::MatrixXd x = exact_matrix(motions);
  const auto [u, v] = factorize(x);
  const std::vector<RigidMotion> base = recover_global_motions(u, v, n);
  const std::vector<RigidMotion> scaled = recover_global_motions(3.0 * u, v, n);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK((base[i].homogeneous() - scaled[i].homogeneous()).norm() < 1e-9);
  }
}

TEST_CASE("recovery projects noisy blocks back onto SE(3)") {
  Rng rng(83);
  const std::size_t n = 6;
  const std::vector<RigidMotion> motions = random_motions(rng, n);
  Eigen::MatrixXd x = exact_matrix(motions);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) += 1e-3 * rng.uniform(-1.0, 1.0);
    }
  }
  const auto [u, v] = factorize(x);
  const std::vector<RigidMotion> recovered = recover_global_motions(u, v, n);
  for (const RigidMotion& m : recovered) {
    const Eigen::Matrix3d r = m.rotation();
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
  }
  CHECK(recovered[0].homogeneous() == Eigen::Matrix4d::Identity());
}

TEST_CASE("recovery propagates SingularBlock and validates shapes") {
  const Eigen::MatrixXd u = Eigen::MatrixXd::Zero(8, 4);
  const Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 8);
  CHECK_THROWS_AS(recover_global_motions(u, v, 2), Error);  // zero blocks
  CHECK_THROWS_AS(recover_global_motions(u, v, 3), Error);  // bad shapes
}
