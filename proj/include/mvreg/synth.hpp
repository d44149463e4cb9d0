#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mvreg/error.hpp"
#include "mvreg/point_cloud.hpp"
#include "mvreg/rng.hpp"
#include "mvreg/se3.hpp"

namespace mvreg {

enum class SurfaceKind { sphere, torus, wave_grid };

inline SurfaceKind surface_from_name(const std::string& name) {
  if (name == "sphere") return SurfaceKind::sphere;
  if (name == "torus") return SurfaceKind::torus;
  if (name == "wave" || name == "wave_grid") return SurfaceKind::wave_grid;
  throw Error("ConfigError", "unknown surface '" + name + "'");
}

struct SyntheticScene {
  SurfaceKind surface = SurfaceKind::torus;
  std::size_t n_views = 8;
  std::size_t points_per_view = 2000;
  double overlap_target = 0.7;        // adjacent-view overlap fraction
  double noise_sigma = 0.0;           // fraction of model bbox diagonal
  double rotation_perturbation = 0.0;  // half-width (rad) of initial noise

  double sphere_radius = 1.0;
  double torus_major = 1.0;
  double torus_minor = 0.35;
  double wave_extent = 2.0;
  double wave_amplitude = 0.3;
  double wave_frequency = 2.5;
};

struct SceneData {
  std::vector<PointCloud> scans;        // each in its own local frame
  std::vector<RigidMotion> ground_truth;  // anchored: motion 1 = identity
  std::vector<RigidMotion> initial;       // rotation-perturbed ground truth
};

namespace detail {

// Window half-width (in the view parameter) so that adjacent windows spaced
// by `spacing` share at least `overlap` of their extent. A small margin
// keeps the realized point-wise overlap above the request.
inline double window_half_width(double spacing, double overlap) {
  if (overlap <= 0.0 || overlap >= 1.0) {
    throw Error("ConfigError", "overlap_target must lie in (0,1)");
  }
  return 0.5 * spacing / (1.0 - overlap) * 1.15;
}

inline Eigen::Vector3d torus_point(double major, double minor, double u,
                                   double v) {
  const double ring = major + minor * std::cos(v);
  return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
}

}  // namespace detail

/// Generates one multi-view scene: surface samples restricted to per-view
/// visibility windows, expressed in per-view local frames via the inverse
/// ground-truth motions, plus the rotation-perturbed initial motions.
/// Deterministic for a given seed.
inline SceneData generate_scene(const SyntheticScene& scene,
                                std::uint64_t seed) {
  if (scene.n_views < 2) {
    throw Error("ConfigError", "a scene needs at least 2 views");
  }
  const std::size_t n = scene.n_views;
  const double two_pi = 2.0 * std::numbers::pi;
  Rng rng(seed);

  // Global-frame samples and the view poses (local -> global).
  std::vector<std::vector<Eigen::Vector3d>> global_points(n);
  std::vector<RigidMotion> poses;
  poses.reserve(n);

  switch (scene.surface) {
    case SurfaceKind::torus: {
      const double spacing = two_pi / static_cast<double>(n);
      const double h =
          std::min(detail::window_half_width(spacing, scene.overlap_target),
                   std::numbers::pi);
      for (std::size_t i = 0; i < n; ++i) {
        const double center = spacing * static_cast<double>(i);
        auto& pts = global_points[i];
        pts.reserve(scene.points_per_view);
        while (pts.size() < scene.points_per_view) {
          const double u = rng.uniform(center - h, center + h);
          const double v = rng.uniform(0.0, two_pi);
          // area-uniform sampling over the tube angle
          const double accept = (scene.torus_major +
                                 scene.torus_minor * std::cos(v)) /
                                (scene.torus_major + scene.torus_minor);
          if (rng.uniform() > accept) continue;
          pts.push_back(
              detail::torus_point(scene.torus_major, scene.torus_minor, u, v));
        }
        const Eigen::Matrix3d rot =
            Eigen::AngleAxisd(center, Eigen::Vector3d::UnitZ())
                .toRotationMatrix();
        const Eigen::Vector3d sector_center =
            rot * Eigen::Vector3d(scene.torus_major, 0.0, 0.0);
        poses.push_back(RigidMotion::from_parts(rot, sector_center));
      }
      break;
    }
    case SurfaceKind::sphere: {
      const double spacing = two_pi / static_cast<double>(n);
      const double h = std::min(
          detail::window_half_width(spacing, scene.overlap_target) * 1.15,
          0.45 * std::numbers::pi);
      // Caps around equatorial directions; a point belongs to view i when
      // its angle to the cap axis is below h.
      for (std::size_t i = 0; i < n; ++i) {
        const double center = spacing * static_cast<double>(i);
        const Eigen::Vector3d axis(std::cos(center), std::sin(center), 0.0);
        const Eigen::Matrix3d rot =
            Eigen::AngleAxisd(center, Eigen::Vector3d::UnitZ())
                .toRotationMatrix();
        auto& pts = global_points[i];
        pts.reserve(scene.points_per_view);
        const double cos_h = std::cos(h);
        while (pts.size() < scene.points_per_view) {
          // uniform on the cap: polar angle from inverse-CDF, then azimuth
          const double c = 1.0 - rng.uniform() * (1.0 - cos_h);
          const double alpha = std::acos(c);
          const double beta = rng.uniform(0.0, two_pi);
          Eigen::Vector3d local(std::cos(alpha),
                                std::sin(alpha) * std::cos(beta),
                                std::sin(alpha) * std::sin(beta));
          pts.push_back(scene.sphere_radius * (rot * local));
        }
        poses.push_back(
            RigidMotion::from_parts(rot, scene.sphere_radius * axis));
      }
      break;
    }
    case SurfaceKind::wave_grid: {
      const double width = scene.wave_extent;
      const double step = width * (1.0 - scene.overlap_target) / 1.15;
      for (std::size_t i = 0; i < n; ++i) {
        const double x0 = step * static_cast<double>(i);
        auto& pts = global_points[i];
        pts.reserve(scene.points_per_view);
        for (std::size_t k = 0; k < scene.points_per_view; ++k) {
          const double x = rng.uniform(x0, x0 + width);
          const double y = rng.uniform(0.0, scene.wave_extent);
          const double z = scene.wave_amplitude *
                           std::sin(scene.wave_frequency * x) *
                           std::cos(scene.wave_frequency * y);
          pts.emplace_back(x, y, z);
        }
        const Eigen::Matrix3d rot = rng.small_rotation(0.25);
        const Eigen::Vector3d center(x0 + 0.5 * width, 0.5 * scene.wave_extent,
                                     0.0);
        poses.push_back(RigidMotion::from_parts(rot, center));
      }
      break;
    }
  }

  // Model diagonal for the noise scale, from all global samples.
  Eigen::Vector3d lo = global_points[0][0];
  Eigen::Vector3d hi = lo;
  for (const auto& pts : global_points) {
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  const double diagonal = (hi - lo).norm();
  const double sigma = scene.noise_sigma * diagonal;

  // Anchor the ground truth to the first view's frame.
  const RigidMotion anchor = invert(poses[0]);
  SceneData data;
  data.ground_truth.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.ground_truth.push_back(i == 0 ? RigidMotion::identity()
                                       : compose(anchor, poses[i]));
  }
  // With the re-anchored gauge, global coordinates are the anchor applied to
  // the raw surface coordinates.
  data.scans.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RigidMotion to_local = invert(data.ground_truth[i]);
    auto& scan = data.scans[i];
    scan.id = "view_" + std::to_string(i);
    scan.points.reserve(global_points[i].size());
    for (const auto& p : global_points[i]) {
      Eigen::Vector3d q = to_local.apply(anchor.apply(p));
      if (sigma > 0.0) {
        q += sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      }
      scan.points.push_back(q);
    }
  }

  data.initial.reserve(n);
  data.initial.push_back(RigidMotion::identity());
  for (std::size_t i = 1; i < n; ++i) {
    const RigidMotion& truth = data.ground_truth[i];
    const Eigen::Matrix3d noise =
        rng.small_rotation(scene.rotation_perturbation);
    data.initial.push_back(
        RigidMotion::from_parts(noise * truth.rotation(), truth.translation()));
  }
  return data;
}

}  // namespace mvreg
