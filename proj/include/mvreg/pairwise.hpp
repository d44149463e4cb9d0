#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mvreg/error.hpp"
#include "mvreg/kdtree.hpp"
#include "mvreg/point_cloud.hpp"
#include "mvreg/se3.hpp"

namespace mvreg {

struct TrICPConfig {
  double lambda_trim = 2.0;       // exponent in the trimmed objective
  double xi_threshold = 0.4;      // overlap acceptance threshold
  std::size_t max_iterations = 100;
  double convergence_tol = 1e-8;  // relative change of psi between iterations
};

struct OverlapEstimate {
  double xi = 0.0;
  double distance_threshold = 0.0;
};

/// A relative motion with the statistics that qualify it: final overlap
/// fraction, trimmed MSE (Pe), model-shape resolution (Qe), and the
/// reliability weight (A before normalization, B after).
struct PairwiseEstimate {
  RigidMotion motion;
  double overlap = 0.0;
  double trimmed_mse = 0.0;
  double model_resolution = 0.0;
  double weight = 0.0;
};

struct TrICPDiagnostics {
  std::vector<double> psi_history;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

struct OverlapProfile {
  std::size_t k_star = 0;         // prefix length minimizing psi(k)
  std::size_t trimmed_count = 0;  // pairs at or below the distance threshold
  double threshold = 0.0;
  double xi = 0.0;
  double trimmed_sum_d2 = 0.0;
  double psi = 0.0;
};

/// Scans every prefix of the ascending squared-distance profile and keeps
/// the prefix length minimizing psi(k) = sum_k d^2 / (k * (k/n)^(1+lambda)).
/// Ties take the largest k, and the trimmed set is everything at or below
/// the distance at that prefix; with an all-zero profile this degenerates to
/// xi = 1, threshold = 0 without error.
inline OverlapProfile overlap_profile(const std::vector<double>& d2_sorted,
                                      double lambda) {
  const std::size_t n = d2_sorted.size();
  const std::size_t k_min = std::min(
      n, std::max<std::size_t>(
             10, static_cast<std::size_t>(std::ceil(0.05 * double(n)))));
  const double n_pow = std::pow(static_cast<double>(n), 1.0 + lambda);

  double prefix = 0.0;
  double best_psi = std::numeric_limits<double>::infinity();
  std::size_t best_k = n;
  double best_prefix = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    prefix += d2_sorted[k - 1];
    if (k < k_min) continue;
    const double psi =
        prefix * n_pow / std::pow(static_cast<double>(k), 2.0 + lambda);
    if (psi <= best_psi) {
      best_psi = psi;
      best_k = k;
      best_prefix = prefix;
    }
  }

  OverlapProfile out;
  out.k_star = best_k;
  const double thr2 = d2_sorted[best_k - 1];
  out.threshold = std::sqrt(thr2);
  // Include ties at the threshold; this also keeps xi positive when the
  // best prefix consists of exact coincidences (threshold 0).
  std::size_t m = best_k;
  double sum = best_prefix;
  while (m < n && d2_sorted[m] <= thr2) {
    sum += d2_sorted[m];
    ++m;
  }
  out.trimmed_count = m;
  out.trimmed_sum_d2 = sum;
  out.xi = static_cast<double>(m) / static_cast<double>(n);
  out.psi = sum * n_pow / std::pow(static_cast<double>(m), 2.0 + lambda);
  return out;
}

/// Closed-form least-squares rigid alignment (centroid-subtracted SVD with
/// determinant correction). Throws DegenerateGeometry when the
/// cross-covariance has rank < 3.
inline RigidMotion rigid_align(const std::vector<Eigen::Vector3d>& source,
                               const std::vector<Eigen::Vector3d>& target) {
  const std::size_t n = source.size();
  if (n < 3) {
    throw Error("DegenerateGeometry",
                "rigid alignment needs at least 3 correspondences");
  }
  Eigen::Vector3d sc = Eigen::Vector3d::Zero();
  Eigen::Vector3d tc = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    sc += source[k];
    tc += target[k];
  }
  sc /= static_cast<double>(n);
  tc /= static_cast<double>(n);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    h += (source[k] - sc) * (target[k] - tc).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& s = svd.singularValues();
  if (s(2) <= kSingularTol * std::max(s(0), 1e-300)) {
    throw Error("DegenerateGeometry",
                "cross-covariance of the trimmed set has rank < 3");
  }
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (v * u.transpose()).determinant());
  const Eigen::Matrix3d r = v * d.asDiagonal() * u.transpose();
  return RigidMotion::from_parts(r, tc - r * sc);
}

}  // namespace detail

/// Estimates the overlap fraction of `source` against the indexed model
/// under `current_motion` by minimizing psi over sorted-distance prefixes.
inline OverlapEstimate estimate_overlap(const PointCloud& source,
                                        const NeighborIndex& target,
                                        const RigidMotion& current_motion,
                                        const TrICPConfig& cfg) {
  if (source.empty()) {
    throw Error("EmptyCloud", "overlap estimation with empty source");
  }
  std::vector<double> d2;
  d2.reserve(source.size());
  for (const auto& p : source.points) {
    const Neighbor nb = target.nearest(current_motion.apply(p));
    d2.push_back(nb.distance * nb.distance);
  }
  std::sort(d2.begin(), d2.end());
  const detail::OverlapProfile profile =
      detail::overlap_profile(d2, cfg.lambda_trim);
  return OverlapEstimate{profile.xi, profile.threshold};
}

inline OverlapEstimate estimate_overlap(const PointCloud& source,
                                        const PointCloud& target,
                                        const RigidMotion& current_motion,
                                        const TrICPConfig& cfg) {
  return estimate_overlap(source, NeighborIndex(target), current_motion, cfg);
}

/// Trimmed ICP with simultaneous overlap re-estimation. Each step searches
/// correspondences, re-estimates the overlap prefix, and realigns the
/// trimmed set in closed form; psi never increases between iterations. The
/// returned motion maps source coordinates into the model frame.
inline PairwiseEstimate trimmed_icp(
    const PointCloud& source, const NeighborIndex& target,
    const RigidMotion& init, const TrICPConfig& cfg,
    TrICPDiagnostics* diagnostics = nullptr,
    std::optional<double> model_resolution = std::nullopt) {
  if (source.empty()) {
    throw Error("EmptyCloud", "trimmed ICP with empty source");
  }
  const std::size_t n = source.size();
  RigidMotion motion = init;

  struct Pair {
    double d2;
    std::uint32_t src;
    std::uint32_t tgt;
  };
  std::vector<Pair> pairs(n);
  std::vector<double> d2_sorted(n);
  std::vector<Eigen::Vector3d> trimmed_src, trimmed_tgt;

  TrICPDiagnostics local;
  TrICPDiagnostics& diag = diagnostics ? *diagnostics : local;
  diag.psi_history.clear();
  diag.iterations = 0;
  diag.converged = false;

  detail::OverlapProfile profile;
  double psi_prev = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0;; ++iter) {
    for (std::size_t a = 0; a < n; ++a) {
      const Neighbor nb = target.nearest(motion.apply(source.points[a]));
      pairs[a] = Pair{nb.distance * nb.distance, static_cast<std::uint32_t>(a),
                      static_cast<std::uint32_t>(nb.index)};
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return a.d2 < b.d2 || (a.d2 == b.d2 && a.src < b.src);
    });
    for (std::size_t a = 0; a < n; ++a) d2_sorted[a] = pairs[a].d2;
    profile = detail::overlap_profile(d2_sorted, cfg.lambda_trim);
    diag.psi_history.push_back(profile.psi);

    const double rel =
        std::abs(profile.psi - psi_prev) / std::max(psi_prev, 1e-300);
    if (psi_prev != std::numeric_limits<double>::infinity() &&
        rel < cfg.convergence_tol) {
      diag.converged = true;
      break;
    }
    if (iter >= cfg.max_iterations) break;
    psi_prev = profile.psi;

    trimmed_src.clear();
    trimmed_tgt.clear();
    trimmed_src.reserve(profile.trimmed_count);
    trimmed_tgt.reserve(profile.trimmed_count);
    for (std::size_t k = 0; k < profile.trimmed_count; ++k) {
      trimmed_src.push_back(source.points[pairs[k].src]);
      trimmed_tgt.push_back(target.points()[pairs[k].tgt]);
    }
    motion = detail::rigid_align(trimmed_src, trimmed_tgt);
    diag.iterations = iter + 1;
  }

  PairwiseEstimate estimate;
  estimate.motion = motion;
  estimate.overlap = profile.xi;
  estimate.trimmed_mse =
      profile.trimmed_sum_d2 / static_cast<double>(profile.trimmed_count);
  estimate.model_resolution =
      model_resolution ? *model_resolution : self_resolution(target);
  estimate.weight = 0.0;  // assigned by compute_weight/normalize_weights
  return estimate;
}

inline PairwiseEstimate trimmed_icp(const PointCloud& source,
                                    const PointCloud& target,
                                    const RigidMotion& init,
                                    const TrICPConfig& cfg,
                                    TrICPDiagnostics* diagnostics = nullptr) {
  return trimmed_icp(source, NeighborIndex(target), init, cfg, diagnostics);
}

/// Reliability weight A = Qe / Pe^2, with Pe floored at 1e-12*Qe so exact
/// alignments do not blow up the ratio.
inline double compute_weight(double pe, double qe) {
  const double floor = 1e-12 * qe;
  const double pe_eff = std::max(pe, floor);
  return qe / (pe_eff * pe_eff);
}

using PairKey = std::pair<std::size_t, std::size_t>;

/// Normalizes weights so the largest becomes 1 (B = A / max A).
inline std::map<PairKey, double> normalize_weights(
    const std::map<PairKey, double>& weights) {
  if (weights.empty()) {
    throw Error("NoWeights", "no pairwise weights to normalize");
  }
  double max_a = 0.0;
  for (const auto& [key, a] : weights) max_a = std::max(max_a, a);
  std::map<PairKey, double> out;
  for (const auto& [key, a] : weights) out[key] = a / max_a;
  return out;
}

/// Expands a scalar weight to the 4x4 block used in the weight matrix
/// (Kronecker product with the all-ones block).
inline Eigen::Matrix4d expand_weight(double b) {
  return Eigen::Matrix4d::Constant(b);
}

}  // namespace mvreg
