#pragma once

#include <Eigen/Core>
#include <vector>

#include "mvreg/error.hpp"
#include "mvreg/se3.hpp"

namespace mvreg {

/// Extracts global motions from the factors of the decomposed matrix. The
/// first block row of X = UV links every scan to the frame of scan 1; each
/// 4x4 block is normalized by its (4,4) entry and projected onto SE(3), and
/// the list is then re-anchored so motion 1 is exactly the identity.
inline std::vector<RigidMotion> recover_global_motions(
    const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, std::size_t n) {
  const Eigen::Index dim = static_cast<Eigen::Index>(4 * n);
  if (u.rows() != dim || v.cols() != dim || u.cols() != v.rows()) {
    throw Error("ShapeMismatch", "factor shapes do not match 4N");
  }
  // Only the first block row of UV is needed.
  const Eigen::MatrixXd top = u.topRows(4) * v;

  std::vector<RigidMotion> motions;
  motions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    motions.push_back(project_to_se3(top.block<4, 4>(0, 4 * i)));
  }
  const RigidMotion anchor = invert(motions.front());
  for (std::size_t i = 1; i < n; ++i) {
    motions[i] = compose(anchor, motions[i]);
  }
  motions[0] = RigidMotion::identity();
  return motions;
}

}  // namespace mvreg
