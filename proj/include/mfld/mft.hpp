#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfld/geometry.hpp"
#include "mfld/tensor_io.hpp"

namespace mfld {

// A manifold expressed in its own frame: D orthonormal directions spanning the
// centered point cloud plus the unit center direction. Embedded points carry
// center coordinate 1.
struct LocalManifold {
  Matrix basis;   // N x D
  Matrix coords;  // M x D
  Vector center;  // N, unit norm

  Index dim() const { return coords.cols(); }
  Index points() const { return coords.rows(); }
  // M x (D+1); last column is the center coordinate.
  Matrix embedded() const;
};

LocalManifold build_local_frame(const Matrix& manifold, const Vector& center);

struct AnchorSolution {
  Vector sample;      // T = (t, t0), length D+1
  Vector projection;  // V*
  double lambda = 0;  // |T - V*|
  Vector anchor;      // s~, empty when interior
  Vector weights;     // KKT multipliers, one per manifold point
  bool interior = false;
  bool converged = true;
  int iterations = 0;

  // [T.s~ + kappa]_+^2 / |s~|^2, zero for interior samples.
  double contribution(double kappa = 0.0) const;
};

struct KktResiduals {
  double feasibility = 0;     // max_i (S_i . V* + kappa)_+
  double stationarity = 0;    // |T - V* - sum_i w_i S_i| / max(1, |T|)
  double slackness = 0;       // max_i w_i |S_i . V* + kappa|
  double min_weight = 0;
  bool ok(double feas_tol = 1e-8, double stat_tol = 1e-6, double slack_tol = 1e-8) const {
    return feasibility <= feas_tol && stationarity <= stat_tol && slackness <= slack_tol &&
           min_weight >= 0.0;
  }
};

KktResiduals certify(const Matrix& embedded, const AnchorSolution& sol, double kappa = 0.0);

// Reusable solver for min |V - T|^2 s.t. S V <= -kappa, S = embedded points.
class AnchorSolver {
 public:
  explicit AnchorSolver(Matrix embedded, double kappa = 0.0, int max_iterations = 10000);

  AnchorSolution solve(const Vector& sample) const;
  const Matrix& embedded() const { return s_; }
  double kappa() const { return kappa_; }

 private:
  Matrix s_;   // M x (D+1)
  Matrix st_;  // (D+1) x M
  double kappa_;
  int max_iterations_;
};

AnchorSolution solve_anchor(const LocalManifold& local, const Vector& sample, double kappa = 0.0);

struct ManifoldMetrics {
  double inv_capacity = 0;
  double alpha = 0;  // +inf when no sample violated any constraint
  double radius = 0;
  double dimension = 0;
  bool geometry_defined = false;  // false when every sample was interior
  double inv_capacity_stderr = 0;
  std::size_t n_samples = 0;
  std::size_t n_interior = 0;
  std::size_t n_rejected = 0;
  Index embed_dim = 0;
  Index n_points = 0;
};

ManifoldMetrics manifold_geometry(const LocalManifold& local, std::size_t n_t, std::uint64_t seed,
                                  double kappa = 0.0, std::vector<AnchorSolution>* trace = nullptr);

double aggregate_capacity(std::span<const ManifoldMetrics> metrics);

// Capacity of a D-dimensional ball of relative radius R.
double ball_capacity(double radius, double dim);

struct MftParams {
  std::size_t n_t = 200;
  std::uint64_t seed = 0;
  double kappa = 0.0;
  double variance_threshold = 0.90;
  CorrelationMode corr_mode = CorrelationMode::Pearson;
};

struct ManifoldResult {
  std::string label;
  Index size = 0;
  std::optional<ManifoldMetrics> metrics;  // empty when excluded
  std::string error;
};

struct MftReport {
  std::vector<ManifoldResult> manifolds;  // in input order
  double alpha = 0;
  double alpha_lb = 0;        // 2 / mean(M)
  double alpha_over_lb = 0;   // alpha * mean(M) / 2
  double mean_size = 0;
  double radius_mean = 0;
  double dimension_mean = 0;
  double dimension_over_m = 0;  // mean over manifolds of D_M / M_mu
  double inv_capacity_stderr = 0;
  double rho_center_pre = 0;
  double rho_center_post = 0;
  Index center_subspace_dim = 0;
  std::size_t n_excluded = 0;
  std::size_t n_rejected = 0;
};

MftReport analyze(const ManifoldSet& mset, const MftParams& params = {});

}  // namespace mfld
