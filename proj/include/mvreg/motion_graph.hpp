#pragma once

#include <Eigen/Core>
#include <set>
#include <string>
#include <vector>

#include "mvreg/error.hpp"
#include "mvreg/pairwise.hpp"
#include "mvreg/se3.hpp"

namespace mvreg {

/// The reconstructed 4Nx4N block matrix of relative motions together with
/// its weight matrix and observation mask. Diagonal blocks are identity with
/// weight 1; unobserved blocks are zero with weight 0; the mask is the
/// entry-wise ceiling of the weights.
struct BlockMotionMatrix {
  std::size_t n_scans = 0;
  Eigen::MatrixXd x_hat;
  Eigen::MatrixXd w;
  Eigen::MatrixXd omega;

  static BlockMotionMatrix with_identity_diagonal(std::size_t n) {
    BlockMotionMatrix m;
    m.n_scans = n;
    const Eigen::Index dim = static_cast<Eigen::Index>(4 * n);
    m.x_hat = Eigen::MatrixXd::Zero(dim, dim);
    m.w = Eigen::MatrixXd::Zero(dim, dim);
    m.omega = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
      m.x_hat.block<4, 4>(4 * i, 4 * i) = Eigen::Matrix4d::Identity();
      m.w.block<4, 4>(4 * i, 4 * i) = Eigen::Matrix4d::Ones();
      m.omega.block<4, 4>(4 * i, 4 * i) = Eigen::Matrix4d::Ones();
    }
    return m;
  }

  bool block_observed(std::size_t i, std::size_t j) const {
    return omega(static_cast<Eigen::Index>(4 * i),
                 static_cast<Eigen::Index>(4 * j)) != 0.0;
  }

  Eigen::Matrix4d block(std::size_t i, std::size_t j) const {
    return x_hat.block<4, 4>(4 * i, 4 * j);
  }

  RigidMotion motion_block(std::size_t i, std::size_t j) const {
    const Eigen::Matrix4d b = block(i, j);
    return RigidMotion::from_parts(b.topLeftCorner<3, 3>(),
                                   b.topRightCorner<3, 1>());
  }

  void set_block(std::size_t i, std::size_t j, const RigidMotion& motion,
                 double weight) {
    x_hat.block<4, 4>(4 * i, 4 * j) = motion.homogeneous();
    w.block<4, 4>(4 * i, 4 * j) = expand_weight(weight);
    omega.block<4, 4>(4 * i, 4 * j) = Eigen::Matrix4d::Ones();
  }
};

struct MotionObservation {
  std::size_t i = 0;
  std::size_t j = 0;
  PairwiseEstimate estimate;
};

/// Builds the block matrix from available estimates: block (i,j) holds the
/// estimated relative motion with its normalized weight expanded to a 4x4
/// block; everything unobserved stays zero.
inline BlockMotionMatrix assemble(std::size_t n,
                                  const std::vector<MotionObservation>& obs) {
  BlockMotionMatrix m = BlockMotionMatrix::with_identity_diagonal(n);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const MotionObservation& o : obs) {
    if (o.i >= n || o.j >= n || o.i == o.j) {
      throw Error("IndexOutOfRange",
                  "observation (" + std::to_string(o.i) + "," +
                      std::to_string(o.j) + ") with n=" + std::to_string(n));
    }
    if (!seen.insert({o.i, o.j}).second) {
      throw Error("DuplicatePair", "observation (" + std::to_string(o.i) +
                                       "," + std::to_string(o.j) +
                                       ") given twice");
    }
    m.set_block(o.i, o.j, o.estimate.motion, o.estimate.weight);
  }
  return m;
}

/// Anti-symmetry completion: wherever block (i,j) is observed and (j,i) is
/// not, fill (j,i) with the inverse motion carrying the same weight. Blocks
/// observed in both directions are left untouched.
inline BlockMotionMatrix complete(const BlockMotionMatrix& m) {
  BlockMotionMatrix out = m;
  for (std::size_t i = 0; i < m.n_scans; ++i) {
    for (std::size_t j = 0; j < m.n_scans; ++j) {
      if (i == j) continue;
      if (m.block_observed(i, j) && !m.block_observed(j, i)) {
        out.set_block(j, i, invert(m.motion_block(i, j)),
                      m.w(static_cast<Eigen::Index>(4 * i),
                          static_cast<Eigen::Index>(4 * j)));
      }
    }
  }
  return out;
}

/// The exact rank-4 matrix X with block (i,j) = Mi^-1 * Mj.
inline Eigen::MatrixXd exact_matrix(const std::vector<RigidMotion>& motions) {
  const std::size_t n = motions.size();
  std::vector<RigidMotion> inverses;
  inverses.reserve(n);
  for (const RigidMotion& m : motions) inverses.push_back(invert(m));

  Eigen::MatrixXd x(4 * n, 4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        x.block<4, 4>(4 * i, 4 * j) = Eigen::Matrix4d::Identity();
      } else {
        x.block<4, 4>(4 * i, 4 * j) =
            compose(inverses[i], motions[j]).homogeneous();
      }
    }
  }
  return x;
}

/// True when the undirected graph over observed off-diagonal blocks connects
/// all scans.
inline bool graph_connected(const BlockMotionMatrix& m) {
  const std::size_t n = m.n_scans;
  if (n == 0) return true;
  std::vector<char> visited(n, 0);
  std::vector<std::size_t> stack{0};
  visited[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      if (visited[j] || i == j) continue;
      if (m.block_observed(i, j) || m.block_observed(j, i)) {
        visited[j] = 1;
        ++reached;
        stack.push_back(j);
      }
    }
  }
  return reached == n;
}

}  // namespace mvreg
