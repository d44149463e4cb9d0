#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "mvreg/se3.hpp"

namespace mvreg {

/// An ordered set of 3D points; the unit of ingestion.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::string id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  double bbox_diagonal() const {
    if (points.empty()) return 0.0;
    Eigen::Vector3d lo = points.front();
    Eigen::Vector3d hi = points.front();
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
  }
};

inline PointCloud transformed(const PointCloud& cloud, const RigidMotion& m) {
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(m.apply(p));
  return out;
}

}  // namespace mvreg
