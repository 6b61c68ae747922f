#pragma once

#include <cstddef>
#include <vector>

#include "mfld/tensor_io.hpp"

namespace mfld {

enum class CorrelationMode { Pearson, Cosine };

struct CenterStats {
  Matrix centers;         // N x P, column mu is the mean of manifold mu
  Matrix pairwise_corr;   // P x P, unit diagonal
  double rho_center = 0;  // mean |off-diagonal| correlation
  std::vector<bool> zero_norm;
  bool has_zero_norm = false;
};

// Correlation between two vectors; 0 when either has zero spread.
double vector_correlation(const Vector& a, const Vector& b, CorrelationMode mode);

ManifoldSet subtract_global_mean(const ManifoldSet& mset);

CenterStats compute_centers(const ManifoldSet& mset, CorrelationMode mode = CorrelationMode::Pearson);

// Mean |off-diagonal| correlation of the columns of `centers`.
double mean_abs_correlation(const Matrix& centers, CorrelationMode mode);

// Top-k left singular vectors (N x k) of the mean-subtracted center matrix,
// k the smallest count whose squared singular values reach the threshold.
Matrix find_center_subspace(const CenterStats& stats, double variance_threshold = 0.90);

ManifoldSet project_residual(const ManifoldSet& mset, const Matrix& basis);

struct PreprocessedSet {
  std::vector<std::string> labels;   // retained manifolds only
  std::vector<Matrix> manifolds;     // M_mu x N, rows divided by the center norm
  std::vector<Vector> centers;       // unit norm
  std::vector<double> scale;         // center norm that was divided out
  std::vector<std::size_t> retained;  // indices into the input set
  std::vector<std::size_t> degenerate;
  Matrix basis;                      // N x k shared center subspace (k may be 0)
  double rho_center_pre = 0;
  double rho_center_post = 0;
};

PreprocessedSet normalize_centers(const ManifoldSet& mset);

struct PreprocessOptions {
  double variance_threshold = 0.90;
  CorrelationMode corr_mode = CorrelationMode::Pearson;
};

// Global mean removal, center statistics, shared center-subspace removal and
// center-norm normalization, in that order.
PreprocessedSet preprocess(const ManifoldSet& mset, const PreprocessOptions& options = {});

}  // namespace mfld
