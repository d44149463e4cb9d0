#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "mvreg/se3.hpp"

namespace mvreg {

/// Deterministic random source. Distributions are hand-rolled on top of the
/// raw engine so that identical seeds reproduce identical streams regardless
/// of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::Vector3d vector_in_box(double half_width) {
    return Eigen::Vector3d(uniform(-half_width, half_width),
                           uniform(-half_width, half_width),
                           uniform(-half_width, half_width));
  }

  /// Uniform rotation from a normalized quaternion with normal components.
  Eigen::Matrix3d rotation() {
    Eigen::Quaterniond q(normal(), normal(), normal(), normal());
    q.normalize();
    return q.toRotationMatrix();
  }

  RigidMotion rigid_motion(double translation_half_width = 1.0) {
    return RigidMotion::from_parts(rotation(),
                                   vector_in_box(translation_half_width));
  }

  /// Rotation with axis-angle components uniform in [-half_width,
  /// half_width]; its geodesic magnitude is at most sqrt(3)*half_width.
  Eigen::Matrix3d small_rotation(double half_width) {
    const Eigen::Vector3d w = vector_in_box(half_width);
    const double angle = w.norm();
    if (angle == 0.0) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mvreg
