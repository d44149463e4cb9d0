#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>
#include <sstream>

#include "mvreg/rng.hpp"
#include "mvreg/se3.hpp"

using namespace mvreg;

namespace {

double hom_distance(const RigidMotion& a, const RigidMotion& b) {
  return (a.homogeneous() - b.homogeneous()).norm();
}

}  // namespace

TEST_CASE("compose: identity and commuting translations") {
  const RigidMotion i = RigidMotion::identity();
  CHECK(hom_distance(compose(i, i), i) == 0.0);

  const auto a = RigidMotion::translate({1, 0, 0});
  const auto b = RigidMotion::translate({0, 2, 0});
  const auto ab = compose(a, b);
  CHECK(ab.translation().isApprox(Eigen::Vector3d(1, 2, 0)));
  CHECK(ab.rotation().isIdentity(0.0));
}

TEST_CASE("compose agrees with applying motions to points in sequence") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidMotion a = rng.rigid_motion();
    const RigidMotion b = rng.rigid_motion();
    const RigidMotion ab = compose(a, b);
    for (int k = 0; k < 10; ++k) {
      const Eigen::Vector3d p = rng.vector_in_box(5.0);
      CHECK((ab.apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
    }
  }
}

TEST_CASE("invert: identity, translation, compose-and-compare") {
  CHECK(hom_distance(invert(RigidMotion::identity()), RigidMotion::identity()) ==
        0.0);
  const Eigen::Vector3d t(0.3, -1.5, 2.0);
  CHECK(invert(RigidMotion::translate(t)).translation().isApprox(-t));

  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidMotion m = rng.rigid_motion();
    CHECK(hom_distance(compose(m, invert(m)), RigidMotion::identity()) < 1e-9);
    CHECK(hom_distance(invert(invert(m)), m) < 1e-9);
  }
}

TEST_CASE("relative_motion closes the triangle") {
  Rng rng(13);
  const RigidMotion m = rng.rigid_motion();
  CHECK(hom_distance(relative_motion(m, m), RigidMotion::identity()) < 1e-12);
  CHECK(hom_distance(relative_motion(RigidMotion::identity(), m), m) == 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidMotion mi = rng.rigid_motion();
    const RigidMotion mj = rng.rigid_motion();
    CHECK(hom_distance(compose(mi, relative_motion(mi, mj)), mj) < 1e-9);
  }
}

TEST_CASE("compose is associative") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidMotion a = rng.rigid_motion();
    const RigidMotion b = rng.rigid_motion();
    const RigidMotion c = rng.rigid_motion();
    CHECK(hom_distance(compose(compose(a, b), c), compose(a, compose(b, c))) <
          1e-9);
  }
}

TEST_CASE("project_to_se3: fixed points and scale removal") {
  const Eigen::Matrix4d i4 = Eigen::Matrix4d::Identity();
  CHECK(hom_distance(project_to_se3(i4), RigidMotion::identity()) < 1e-15);
  CHECK(hom_distance(project_to_se3(2.0 * i4), RigidMotion::identity()) <
        1e-15);
}

TEST_CASE("project_to_se3 finds the Frobenius-nearest rotation") {
  Rng rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix3d r0 = rng.rotation();
    Eigen::Matrix3d perturbed = r0 + Eigen::Matrix3d::Constant(0.01);
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = perturbed;
    const RigidMotion proj = project_to_se3(m);
    const Eigen::Matrix3d r = proj.rotation();
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);

    // No rotation sampled along one-parameter families through the result,
    // nor any random rotation, may be closer to the perturbed matrix.
    const double best = (perturbed - r).norm();
    for (int axis = 0; axis < 3; ++axis) {
      for (int s = -40; s <= 40; ++s) {
        const double theta = 0.005 * s;
        const Eigen::Matrix3d cand =
            r * Eigen::AngleAxisd(theta, Eigen::Vector3d::Unit(axis))
                    .toRotationMatrix();
        CHECK((perturbed - cand).norm() >= best - 1e-12);
      }
    }
    for (int k = 0; k < 200; ++k) {
      CHECK((perturbed - rng.rotation()).norm() >= best - 1e-12);
    }
  }
}

TEST_CASE("project_to_se3 is idempotent and outputs rank-4 matrices") {
  Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix4d noisy = rng.rigid_motion().homogeneous();
    noisy += 0.01 * Eigen::Matrix4d::Random();
    noisy(3, 3) = 1.0;
    const RigidMotion once = project_to_se3(noisy);
    const RigidMotion twice = project_to_se3(once.homogeneous());
    CHECK(hom_distance(once, twice) < 1e-9);

    Eigen::JacobiSVD<Eigen::Matrix4d> svd(once.homogeneous());
    CHECK(svd.singularValues()(3) > 1e-9 * svd.singularValues()(0));
  }
}

TEST_CASE("project_to_se3 rejects singular inputs") {
  Eigen::Matrix4d zero_scale = Eigen::Matrix4d::Identity();
  zero_scale(3, 3) = 0.0;
  CHECK_THROWS_AS(project_to_se3(zero_scale), Error);

  Eigen::Matrix4d rank_deficient = Eigen::Matrix4d::Identity();
  rank_deficient(0, 0) = 0.0;  // 3x3 block loses rank
  CHECK_THROWS_AS(project_to_se3(rank_deficient), Error);
}

TEST_CASE("from_parts validates rotations") {
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = 1.5;
  CHECK_THROWS_AS(RigidMotion::from_parts(bad, Eigen::Vector3d::Zero()), Error);

  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1.0;
  CHECK_THROWS_AS(
      RigidMotion::from_parts(reflection, Eigen::Vector3d::Zero()), Error);
}

TEST_CASE("motion text format round-trips exactly") {
  Rng rng(17);
  std::vector<RigidMotion> motions;
  motions.push_back(RigidMotion::identity());
  for (int k = 0; k < 7; ++k) motions.push_back(rng.rigid_motion(3.0));

  std::stringstream stream;
  write_motions(stream, motions);
  const std::vector<RigidMotion> back = read_motions(stream);
  REQUIRE(back.size() == motions.size());
  for (std::size_t k = 0; k < motions.size(); ++k) {
    CHECK(motions[k].homogeneous() == back[k].homogeneous());
  }
}

TEST_CASE("read_motions rejects malformed files") {
  std::stringstream truncated("1 0 0 0\n0 1 0 0\n");
  CHECK_THROWS_AS(read_motions(truncated), Error);

  std::stringstream short_row("1 0 0\n");
  CHECK_THROWS_AS(read_motions(short_row), Error);
}
