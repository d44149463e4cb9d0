#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

#include "mvreg/io.hpp"
#include "mvreg/kdtree.hpp"
#include "mvreg/motion_graph.hpp"
#include "mvreg/pairwise.hpp"
#include "mvreg/point_cloud.hpp"
#include "mvreg/recovery.hpp"
#include "mvreg/se3.hpp"
#include "mvreg/wlrs.hpp"

namespace mvreg {

struct PipelineConfig {
  TrICPConfig tricp;
  WlrsConfig wlrs;
  std::size_t max_outer = 30;
  double rotation_tol = 1e-5;     // rad, max per-scan geodesic change
  double translation_tol = 1e-6;  // fraction of the scene bbox diagonal
  double objective_tol = 1e-5;    // relative Obj change
  unsigned threads = 0;           // 0 = hardware concurrency
  std::ostream* log = nullptr;    // progress/timing lines; never in reports
};

struct HistoryEntry {
  std::size_t iteration = 0;
  double obj = 0.0;
  std::size_t selected_pairs = 0;
  double seconds = 0.0;  // wall time; reported on the log stream only
};

struct RegistrationRun {
  std::vector<RigidMotion> motions;
  std::vector<HistoryEntry> history;
  bool converged = false;
  std::size_t outer_iterations = 0;
};

class RegistrationNotConverged : public Error {
 public:
  explicit RegistrationNotConverged(RegistrationRun r)
      : Error("NotConverged",
              "registration hit the outer iteration cap; best-so-far state "
              "attached"),
        best(std::move(r)) {}

  RegistrationRun best;
};

namespace detail {

template <typename Fn>
inline void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (count == 0) return;
  unsigned nt = threads == 0 ? std::thread::hardware_concurrency() : threads;
  if (nt == 0) nt = 1;
  nt = static_cast<unsigned>(
      std::min<std::size_t>(nt, count));
  if (nt <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::vector<RigidMotion> anchored(std::vector<RigidMotion> motions) {
  const RigidMotion anchor = invert(motions.front());
  for (std::size_t i = 1; i < motions.size(); ++i) {
    motions[i] = compose(anchor, motions[i]);
  }
  motions[0] = RigidMotion::identity();
  return motions;
}

}  // namespace detail

/// Mean over scans of the trimmed objective of each scan against the union
/// of all other scans transformed by the current motions.
inline double objective(const std::vector<PointCloud>& scans,
                        const std::vector<RigidMotion>& motions,
                        const TrICPConfig& cfg) {
  const std::size_t n = scans.size();
  if (n < 2) {
    throw Error("TooFewScans", "objective needs at least 2 scans");
  }
  if (motions.size() != n) {
    throw Error("ShapeMismatch", "one motion per scan is required");
  }
  std::vector<PointCloud> global(n);
  for (std::size_t i = 0; i < n; ++i) {
    global[i] = transformed(scans[i], motions[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    PointCloud model;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      model.points.insert(model.points.end(), global[j].points.begin(),
                          global[j].points.end());
    }
    const NeighborIndex index(model);
    std::vector<double> d2;
    d2.reserve(global[i].size());
    for (const auto& p : global[i].points) {
      const Neighbor nb = index.nearest(p);
      d2.push_back(nb.distance * nb.distance);
    }
    std::sort(d2.begin(), d2.end());
    total += detail::overlap_profile(d2, cfg.lambda_trim).psi;
  }
  return total / static_cast<double>(n);
}

/// One full run of the outer registration loop: estimate overlaps, refine
/// selected pairs with trimmed ICP, assemble/complete the block matrix,
/// decompose it, and recover global motions, until the motions settle.
/// Throws GraphDisconnected when the selected pairs do not connect all
/// scans, and NotConverged (best-so-far attached) at the iteration cap.
inline RegistrationRun register_scans(const std::vector<PointCloud>& scans,
                                      const std::vector<RigidMotion>& initial,
                                      const PipelineConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const std::size_t n = scans.size();
  if (n < 2) {
    throw Error("TooFewScans", "registration needs at least 2 scans");
  }
  if (initial.size() != n) {
    throw Error("ShapeMismatch", "one initial motion per scan is required");
  }
  for (const PointCloud& scan : scans) {
    if (scan.empty()) throw Error("EmptyCloud", "cannot register empty scans");
  }

  std::vector<RigidMotion> motions = detail::anchored(initial);

  // Per-scan indexes and resolutions never change across iterations.
  std::vector<NeighborIndex> indexes;
  indexes.reserve(n);
  for (const PointCloud& scan : scans) indexes.emplace_back(scan);
  std::vector<double> resolution(n);
  for (std::size_t i = 0; i < n; ++i) {
    resolution[i] = scans[i].size() >= 2 ? self_resolution(indexes[i]) : 0.0;
  }

  // Scene scale for the translation convergence test.
  PointCloud scene;
  for (std::size_t i = 0; i < n; ++i) {
    const PointCloud g = transformed(scans[i], motions[i]);
    scene.points.insert(scene.points.end(), g.points.begin(), g.points.end());
  }
  const double scene_diagonal = std::max(scene.bbox_diagonal(), 1e-300);

  RegistrationRun run;
  run.history.push_back(
      HistoryEntry{0, objective(scans, motions, cfg.tricp), 0, 0.0});
  double best_obj = run.history.front().obj;
  std::vector<RigidMotion> best_motions = motions;
  double prev_obj = best_obj;

  struct OrderedPair {
    std::size_t i, j;
  };

  for (std::size_t outer = 1; outer <= cfg.max_outer; ++outer) {
    const auto t0 = clock::now();

    // Overlap percentages for all ordered pairs under the current motions.
    std::vector<OrderedPair> all_pairs;
    all_pairs.reserve(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) all_pairs.push_back(OrderedPair{i, j});
      }
    }
    std::vector<double> xi(all_pairs.size(), 0.0);
    detail::parallel_for(all_pairs.size(), cfg.threads, [&](std::size_t k) {
      const auto [i, j] = all_pairs[k];
      xi[k] = estimate_overlap(scans[i], indexes[j],
                               relative_motion(motions[j], motions[i]),
                               cfg.tricp)
                  .xi;
    });

    std::vector<OrderedPair> selected;
    for (std::size_t k = 0; k < all_pairs.size(); ++k) {
      if (xi[k] > cfg.tricp.xi_threshold) selected.push_back(all_pairs[k]);
    }
    if (selected.empty()) {
      throw Error("GraphDisconnected",
                  "no scan pair exceeds the overlap threshold");
    }

    // Refine each selected pair; the estimate for data shape i against model
    // shape j is the motion from frame i into frame j, block (j,i) of X.
    std::vector<PairwiseEstimate> estimates(selected.size());
    detail::parallel_for(selected.size(), cfg.threads, [&](std::size_t k) {
      const auto [i, j] = selected[k];
      PairwiseEstimate est = trimmed_icp(
          scans[i], indexes[j], relative_motion(motions[j], motions[i]),
          cfg.tricp, nullptr, resolution[j]);
      est.weight = compute_weight(est.trimmed_mse, est.model_resolution);
      estimates[k] = est;
    });

    std::map<PairKey, double> weights;
    for (std::size_t k = 0; k < selected.size(); ++k) {
      weights[{selected[k].i, selected[k].j}] = estimates[k].weight;
    }
    weights = normalize_weights(weights);

    std::vector<MotionObservation> observations;
    observations.reserve(selected.size());
    for (std::size_t k = 0; k < selected.size(); ++k) {
      PairwiseEstimate est = estimates[k];
      est.weight = weights.at({selected[k].i, selected[k].j});
      observations.push_back(
          MotionObservation{selected[k].j, selected[k].i, est});
    }

    BlockMotionMatrix matrix = complete(assemble(n, observations));
    if (!graph_connected(matrix)) {
      throw Error("GraphDisconnected",
                  "selected scan pairs leave partial models");
    }

    DecompositionResult factors;
    try {
      factors = decompose(matrix, cfg.wlrs);
    } catch (DecompositionNotConverged& nc) {
      factors = std::move(nc.partial);  // usable partial factors
    }
    const std::vector<RigidMotion> updated =
        recover_global_motions(factors.u, factors.v, n);

    const double obj = objective(scans, updated, cfg.tricp);
    const double seconds =
        std::chrono::duration<double>(clock::now() - t0).count();
    run.history.push_back(HistoryEntry{outer, obj, selected.size(), seconds});
    if (cfg.log) {
      *cfg.log << "outer " << outer << ": obj " << obj << ", pairs "
               << selected.size() << ", " << seconds << " s\n";
    }

    double rot_change = 0.0;
    double trans_change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rot_change = std::max(rot_change, rotation_geodesic(updated[i], motions[i]));
      trans_change = std::max(
          trans_change,
          (updated[i].translation() - motions[i].translation()).norm());
    }
    trans_change /= scene_diagonal;
    const double obj_change =
        std::abs(obj - prev_obj) / std::max(prev_obj, 1e-300);

    motions = updated;
    prev_obj = obj;
    if (obj < best_obj) {
      best_obj = obj;
      best_motions = motions;
    }
    run.outer_iterations = outer;
    if ((rot_change < cfg.rotation_tol && trans_change < cfg.translation_tol) ||
        obj_change < cfg.objective_tol) {
      run.converged = true;
      break;
    }
  }

  run.motions = motions;
  if (!run.converged) {
    run.motions = best_motions;
    throw RegistrationNotConverged(std::move(run));
  }
  return run;
}

/// Run report: deterministic structured text (config echo, per-iteration
/// objective history, final motions). Wall times stay on the log stream so
/// identical runs produce byte-identical reports.
inline void write_report(std::ostream& out, const ConfigMap& config_echo,
                         const RegistrationRun& run) {
  out << "# mvreg registration report\n";
  out << "[config]\n";
  config_echo.write(out);
  out << "[result]\n";
  out << "converged = " << (run.converged ? "true" : "false") << "\n";
  out << "outer_iterations = " << run.outer_iterations << "\n";
  out << "[history]\n";
  out << "iter,obj,selected_pairs\n";
  for (const HistoryEntry& e : run.history) {
    out << e.iteration << "," << format_double(e.obj) << ","
        << e.selected_pairs << "\n";
  }
  out << "[motions]\n";
  write_motions(out, run.motions);
}

}  // namespace mvreg
