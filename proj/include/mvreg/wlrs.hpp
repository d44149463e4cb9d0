#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include "mvreg/error.hpp"
#include "mvreg/motion_graph.hpp"

namespace mvreg {

struct WlrsConfig {
  int rank = 4;
  std::optional<double> lambda_nuclear;  // default 1/sqrt(4N)
  double rho = 1.05;
  std::optional<double> mu_init;  // default 1/spectral norm of x_hat
  double mu_cap = 1e20;
  double inner_tol = 1e-6;   // relative change of (U,V,E)
  double outer_tol = 1e-7;   // relative constraint residual
  std::size_t max_inner = 100;
  std::size_t max_outer = 500;
  std::ostream* diagnostics = nullptr;  // optional per-outer CSV stream
};

struct DecompositionResult {
  Eigen::MatrixXd u;         // 4N x r, orthonormal columns
  Eigen::MatrixXd v;         // r x 4N
  Eigen::MatrixXd e;         // 4N x 4N error matrix
  Eigen::MatrixXd lagrange;  // multiplier L
  std::vector<double> residual_history;
  double mu_final = 0.0;
  std::size_t outer_iterations = 0;
  bool converged = false;
};

class DecompositionNotConverged : public Error {
 public:
  explicit DecompositionNotConverged(DecompositionResult r)
      : Error("NotConverged",
              "decomposition hit the outer iteration cap at residual " +
                  std::to_string(r.residual_history.empty()
                                     ? -1.0
                                     : r.residual_history.back())),
        partial(std::move(r)) {}

  DecompositionResult partial;
};

/// Shrinkage operator S_eps[q] = max(|q|-eps, 0)*sgn(q).
inline double soft_threshold(double q, double eps) {
  const double mag = std::abs(q) - eps;
  if (mag <= 0.0) return 0.0;
  return q < 0.0 ? -mag : mag;
}

/// Orthogonal Procrustes step: U = U1*V1' from the SVD of (X - E + L/mu)*V'.
inline Eigen::MatrixXd update_u(const Eigen::MatrixXd& x_hat,
                                const Eigen::MatrixXd& e,
                                const Eigen::MatrixXd& l, double mu,
                                const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd g = (x_hat - e + l / mu) * v.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0 || s(s.size() - 1) <= kSingularTol * s(0)) {
    throw Error("RankDeficient", "Procrustes target has numerical rank < r");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

/// Nuclear-norm proximal step: SVD of U'(X - E + L/mu) with singular values
/// shrunk by lambda/mu.
inline Eigen::MatrixXd update_v(const Eigen::MatrixXd& x_hat,
                                const Eigen::MatrixXd& e,
                                const Eigen::MatrixXd& l, double mu,
                                const Eigen::MatrixXd& u,
                                double lambda_nuclear) {
  const Eigen::MatrixXd g = u.transpose() * (x_hat - e + l / mu);
  if (lambda_nuclear == 0.0) return g;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  const double eps = lambda_nuclear / mu;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    s(k) = std::max(s(k) - eps, 0.0);
  }
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Error-matrix step: observed entries get per-entry shrinkage with
/// threshold w/mu; missing entries absorb the residual exactly.
inline Eigen::MatrixXd update_e(const Eigen::MatrixXd& x_hat,
                                const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& v,
                                const Eigen::MatrixXd& l, double mu,
                                const Eigen::MatrixXd& w,
                                const Eigen::MatrixXd& omega) {
  Eigen::MatrixXd e = x_hat - u * v + l / mu;
  for (Eigen::Index c = 0; c < e.cols(); ++c) {
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
      if (omega(r, c) != 0.0) {
        e(r, c) = soft_threshold(e(r, c), w(r, c) / mu);
      }
    }
  }
  return e;
}

/// Weighted low-rank + sparse decomposition by inexact ALM with Gauss-Seidel
/// inner sweeps. Throws NotConverged (carrying the partial result) when the
/// outer cap is reached with the constraint residual still above tolerance.
inline DecompositionResult decompose(const BlockMotionMatrix& m,
                                     const WlrsConfig& cfg) {
  const Eigen::Index dim = m.x_hat.rows();
  if (dim == 0 || dim % 4 != 0 || m.x_hat.cols() != dim ||
      m.w.rows() != dim || m.w.cols() != dim || m.omega.rows() != dim ||
      m.omega.cols() != dim) {
    throw Error("ShapeMismatch", "block matrix fields are inconsistent");
  }
  if (cfg.rank < 1 || cfg.rho <= 1.0) {
    throw Error("ConfigError", "decomposition needs rank >= 1 and rho > 1");
  }
  const int r = cfg.rank;
  const double lambda =
      cfg.lambda_nuclear.value_or(1.0 / std::sqrt(static_cast<double>(dim)));

  Eigen::BDCSVD<Eigen::MatrixXd> init_svd(
      m.x_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double spectral = init_svd.singularValues()(0);
  double mu = cfg.mu_init.value_or(1.0 / spectral);

  DecompositionResult res;
  res.u = init_svd.matrixU().leftCols(r);
  res.v = res.u.transpose() * m.x_hat;
  res.e = Eigen::MatrixXd::Zero(dim, dim);
  res.lagrange = Eigen::MatrixXd::Zero(dim, dim);

  const double x_norm = m.x_hat.norm();
  for (std::size_t outer = 0; outer < cfg.max_outer; ++outer) {
    for (std::size_t inner = 0; inner < cfg.max_inner; ++inner) {
      const Eigen::MatrixXd u_new =
          update_u(m.x_hat, res.e, res.lagrange, mu, res.v);
      const Eigen::MatrixXd v_new =
          update_v(m.x_hat, res.e, res.lagrange, mu, u_new, lambda);
      const Eigen::MatrixXd e_new =
          update_e(m.x_hat, u_new, v_new, res.lagrange, mu, m.w, m.omega);
      const double change =
          ((u_new - res.u).norm() + (v_new - res.v).norm() +
           (e_new - res.e).norm()) /
          (1.0 + res.u.norm() + res.v.norm() + res.e.norm());
      res.u = u_new;
      res.v = v_new;
      res.e = e_new;
      if (change < cfg.inner_tol) break;
    }

    const Eigen::MatrixXd constraint = m.x_hat - res.u * res.v - res.e;
    const double residual = constraint.norm();
    res.residual_history.push_back(residual);
    res.outer_iterations = outer + 1;
    res.mu_final = mu;
    if (cfg.diagnostics) {
      const Eigen::Index nnz =
          (res.e.array().abs() > 1e-6).count();
      *cfg.diagnostics << outer + 1 << "," << mu << "," << residual << ","
                       << nnz << "\n";
    }
    if (residual <= cfg.outer_tol * x_norm) {
      res.converged = true;
      break;
    }
    res.lagrange += mu * constraint;
    mu = std::min(cfg.rho * mu, cfg.mu_cap);
  }

  if (!res.converged) {
    throw DecompositionNotConverged(std::move(res));
  }
  return res;
}

}  // namespace mvreg
