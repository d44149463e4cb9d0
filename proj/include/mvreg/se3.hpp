#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mvreg/error.hpp"

namespace mvreg {

// Absolute Frobenius tolerance for SO(3) membership checks.
inline constexpr double kRotationTol = 1e-9;

// Singular values / pivots below this are treated as zero.
inline constexpr double kSingularTol = 1e-12;

/// A rigid motion in SE(3), stored as rotation + translation so the group
/// invariants can be enforced at construction. The 4x4 homogeneous view is
/// produced on demand and always has (0,0,0,1) as its bottom row.
class RigidMotion {
 public:
  RigidMotion()
      : rotation_(Eigen::Matrix3d::Identity()),
        translation_(Eigen::Vector3d::Zero()) {}

  /// Validating constructor; rejects rotations that are not orthonormal
  /// with determinant +1 within kRotationTol.
  static RigidMotion from_parts(const Eigen::Matrix3d& rotation,
                                const Eigen::Vector3d& translation) {
    const double ortho =
        (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
    if (ortho > kRotationTol) {
      throw Error("InvalidMotion",
                  "rotation is not orthonormal (deviation " +
                      std::to_string(ortho) + ")");
    }
    if (std::abs(rotation.determinant() - 1.0) > kRotationTol) {
      throw Error("InvalidMotion", "rotation determinant is not +1");
    }
    return RigidMotion(rotation, translation, Unchecked{});
  }

  static RigidMotion identity() { return RigidMotion(); }

  static RigidMotion translate(const Eigen::Vector3d& t) {
    return RigidMotion(Eigen::Matrix3d::Identity(), t, Unchecked{});
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d homogeneous() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

 private:
  struct Unchecked {};
  RigidMotion(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, Unchecked)
      : rotation_(r), translation_(t) {}

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;

  friend RigidMotion compose(const RigidMotion&, const RigidMotion&);
  friend RigidMotion invert(const RigidMotion&);
  friend RigidMotion project_to_se3(const Eigen::Matrix4d&);
};

/// Homogeneous-matrix product a*b. Products of valid motions stay valid, so
/// no re-validation happens here.
inline RigidMotion compose(const RigidMotion& a, const RigidMotion& b) {
  return RigidMotion(a.rotation_ * b.rotation_,
                     a.rotation_ * b.translation_ + a.translation_,
                     RigidMotion::Unchecked{});
}

inline RigidMotion invert(const RigidMotion& m) {
  Eigen::Matrix3d rt = m.rotation_.transpose();
  return RigidMotion(rt, -(rt * m.translation_), RigidMotion::Unchecked{});
}

/// Relative motion between two global motions: mi^-1 * mj.
inline RigidMotion relative_motion(const RigidMotion& mi,
                                   const RigidMotion& mj) {
  return compose(invert(mi), mj);
}

/// Projects an arbitrary 4x4 matrix onto SE(3): divide by the (4,4) entry,
/// zero the bottom row, and replace the 3x3 block by its nearest rotation
/// (SVD with determinant correction). Throws SingularBlock when the scale
/// entry or the 3x3 block is numerically singular.
inline RigidMotion project_to_se3(const Eigen::Matrix4d& m) {
  if (std::abs(m(3, 3)) < kSingularTol) {
    throw Error("SingularBlock", "homogeneous scale entry is zero");
  }
  Eigen::Matrix4d a = m / m(3, 3);
  a.row(3).head<3>().setZero();
  a(3, 3) = 1.0;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      a.topLeftCorner<3, 3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) < kSingularTol) {
    throw Error("SingularBlock", "rotation block is numerically singular");
  }
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d q(1.0, 1.0, (u * v.transpose()).determinant());
  Eigen::Matrix3d r = u * q.asDiagonal() * v.transpose();
  return RigidMotion(r, a.topRightCorner<3, 1>(), RigidMotion::Unchecked{});
}

/// Geodesic distance between two rotations, in radians.
inline double rotation_geodesic(const Eigen::Matrix3d& ra,
                                const Eigen::Matrix3d& rb) {
  const double c = ((ra * rb.transpose()).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline double rotation_geodesic(const RigidMotion& a, const RigidMotion& b) {
  return rotation_geodesic(a.rotation(), b.rotation());
}

// ---------------------------------------------------------------------------
// Motion text format: one motion per block of 4 lines, 4 numbers per line
// (row-major homogeneous matrix), blank line between blocks. Values are
// written with 17 significant digits so files round-trip exactly.

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_motions(std::ostream& out,
                          const std::vector<RigidMotion>& motions) {
  for (std::size_t k = 0; k < motions.size(); ++k) {
    if (k > 0) out << "\n";
    const Eigen::Matrix4d m = motions[k].homogeneous();
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (j > 0) out << " ";
        out << format_double(m(i, j));
      }
      out << "\n";
    }
  }
}

inline std::vector<RigidMotion> read_motions(std::istream& in) {
  std::vector<RigidMotion> motions;
  std::vector<double> row;
  Eigen::Matrix4d m;
  int rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    double a, b, c, d;
    if (!(ls >> a)) continue;  // blank separator line
    if (!(ls >> b >> c >> d)) {
      throw Error("ParseError",
                  "motion file line " + std::to_string(line_no) +
                      ": expected 4 numbers");
    }
    m.row(rows) << a, b, c, d;
    if (++rows == 4) {
      if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() != 0.0) {
        throw Error("ParseError",
                    "motion file line " + std::to_string(line_no) +
                        ": bottom row must be 0 0 0 1");
      }
      motions.push_back(RigidMotion::from_parts(m.topLeftCorner<3, 3>(),
                                                m.topRightCorner<3, 1>()));
      rows = 0;
    }
  }
  if (rows != 0) {
    throw Error("ParseError", "motion file ends mid-block");
  }
  return motions;
}

}  // namespace mvreg
