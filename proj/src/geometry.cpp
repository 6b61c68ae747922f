#include "mfld/geometry.hpp"

#include <cmath>

#include "mfld/error.hpp"

namespace mfld {

namespace {

constexpr double kDegenerateCenterTol = 1e-10;

// Mean |off-diagonal| cosine from a Gram matrix; a center whose residual norm
// collapsed counts as fully correlated so that removing it is never preferred.
double gram_mean_abs_cosine(const Matrix& gram, const Vector& reference_sq_norms) {
  const Index p = gram.rows();
  if (p < 2) return 0.0;
  Vector norms(p);
  std::vector<bool> collapsed(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) {
    const double sq = std::max(gram(i, i), 0.0);
    norms(i) = std::sqrt(sq);
    collapsed[static_cast<std::size_t>(i)] =
        !(sq > kDegenerateCenterTol * kDegenerateCenterTol * reference_sq_norms(i)) || sq == 0.0;
  }
  double sum = 0.0;
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      if (collapsed[static_cast<std::size_t>(i)] || collapsed[static_cast<std::size_t>(j)]) {
        sum += 1.0;
      } else {
        sum += std::min(1.0, std::abs(gram(i, j)) / (norms(i) * norms(j)));
      }
    }
  }
  return sum / (0.5 * static_cast<double>(p * (p - 1)));
}

}  // namespace

double vector_correlation(const Vector& a, const Vector& b, CorrelationMode mode) {
  if (mode == CorrelationMode::Pearson) {
    const Vector da = a.array() - a.mean();
    const Vector db = b.array() - b.mean();
    const double den = da.norm() * db.norm();
    return den > 0 ? da.dot(db) / den : 0.0;
  }
  const double den = a.norm() * b.norm();
  return den > 0 ? a.dot(b) / den : 0.0;
}

ManifoldSet subtract_global_mean(const ManifoldSet& mset) {
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(mset.feature_dim());
  for (const auto& m : mset.manifolds()) mean += m.points.colwise().sum();
  mean /= static_cast<double>(mset.total_points());

  std::vector<Manifold> out;
  out.reserve(mset.size());
  for (const auto& m : mset.manifolds()) {
    out.push_back({m.label, m.points.rowwise() - mean});
  }
  return ManifoldSet(std::move(out), mset.provenance());
}

double mean_abs_correlation(const Matrix& centers, CorrelationMode mode) {
  const Index p = centers.cols();
  if (p < 2) return 0.0;
  double sum = 0.0;
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      sum += std::abs(vector_correlation(centers.col(i), centers.col(j), mode));
    }
  }
  return sum / (0.5 * static_cast<double>(p * (p - 1)));
}

CenterStats compute_centers(const ManifoldSet& mset, CorrelationMode mode) {
  const auto p = static_cast<Index>(mset.size());
  CenterStats stats;
  stats.centers.resize(mset.feature_dim(), p);
  for (Index mu = 0; mu < p; ++mu) {
    stats.centers.col(mu) = mset[static_cast<std::size_t>(mu)].points.colwise().mean().transpose();
  }

  stats.zero_norm.assign(static_cast<std::size_t>(p), false);
  for (Index mu = 0; mu < p; ++mu) {
    if (stats.centers.col(mu).norm() == 0.0) {
      stats.zero_norm[static_cast<std::size_t>(mu)] = true;
      stats.has_zero_norm = true;
    }
  }

  stats.pairwise_corr = Matrix::Identity(p, p);
  double sum = 0.0;
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      double c = 0.0;
      if (!stats.zero_norm[static_cast<std::size_t>(i)] && !stats.zero_norm[static_cast<std::size_t>(j)]) {
        c = vector_correlation(stats.centers.col(i), stats.centers.col(j), mode);
      }
      stats.pairwise_corr(i, j) = stats.pairwise_corr(j, i) = c;
      sum += std::abs(c);
    }
  }
  stats.rho_center = p > 1 ? sum / (0.5 * static_cast<double>(p * (p - 1))) : 0.0;
  return stats;
}

Matrix find_center_subspace(const CenterStats& stats, double variance_threshold) {
  require(variance_threshold > 0.0 && variance_threshold <= 1.0, ErrorCode::InvalidArgument,
          "variance threshold must lie in (0, 1]");
  const Index p = stats.centers.cols();
  const Index n = stats.centers.rows();
  require(p >= 2, ErrorCode::TooFewManifolds, "center subspace needs P >= 2");

  const Matrix shifted = stats.centers.colwise() - stats.centers.rowwise().mean();
  Eigen::BDCSVD<Matrix> svd(shifted, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return Matrix(n, 0);

  Index rank = 0;
  while (rank < s.size() && s(rank) > 1e-12 * s(0)) ++rank;
  rank = std::min(rank, p - 1);
  const double total = s.head(rank).squaredNorm();

  Index k = 0;
  double captured = 0.0;
  while (k < rank) {
    captured += s(k) * s(k);
    ++k;
    if (captured >= (variance_threshold - 1e-12) * total) break;
  }
  return svd.matrixU().leftCols(k);
}

ManifoldSet project_residual(const ManifoldSet& mset, const Matrix& basis) {
  if (basis.cols() == 0) return mset;
  require(basis.rows() == mset.feature_dim(), ErrorCode::InvalidArgument, "basis dimension mismatch");
  std::vector<Manifold> out;
  out.reserve(mset.size());
  for (const auto& m : mset.manifolds()) {
    Matrix r = m.points - (m.points * basis) * basis.transpose();
    out.push_back({m.label, std::move(r)});
  }
  return ManifoldSet(std::move(out), mset.provenance());
}

PreprocessedSet normalize_centers(const ManifoldSet& mset) {
  PreprocessedSet out;
  out.basis = Matrix(mset.feature_dim(), 0);
  for (std::size_t mu = 0; mu < mset.size(); ++mu) {
    const Matrix& x = mset[mu].points;
    const Vector c = x.colwise().mean().transpose();
    const double norm = c.norm();
    const double extent = x.rowwise().norm().maxCoeff();
    if (!(norm > kDegenerateCenterTol * extent) || norm == 0.0) {
      out.degenerate.push_back(mu);
      continue;
    }
    out.labels.push_back(mset[mu].label);
    out.manifolds.push_back(x / norm);
    out.centers.push_back(c / norm);
    out.scale.push_back(norm);
    out.retained.push_back(mu);
  }
  return out;
}

PreprocessedSet preprocess(const ManifoldSet& mset, const PreprocessOptions& options) {
  const ManifoldSet centered = subtract_global_mean(mset);
  const CenterStats pre = compute_centers(centered, options.corr_mode);
  const Matrix candidate = find_center_subspace(pre, options.variance_threshold);

  // Keep the leading k* candidate directions whose removal leaves the least
  // residual center correlation; k* = 0 when nothing shared is found.
  const Matrix& centers = pre.centers;
  const Matrix coeff = candidate.transpose() * centers;  // k x P
  Matrix gram = centers.transpose() * centers;
  const Vector ref = gram.diagonal();
  Index best_k = 0;
  double best_cost = gram_mean_abs_cosine(gram, ref);
  for (Index k = 1; k <= candidate.cols(); ++k) {
    gram.noalias() -= coeff.row(k - 1).transpose() * coeff.row(k - 1);
    // Stop before a removal wipes out some center entirely.
    if ((gram.diagonal().array() <= 1e-10 * ref.array()).any()) break;
    const double cost = gram_mean_abs_cosine(gram, ref);
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best_k = k;
    }
  }
  const Matrix basis = candidate.leftCols(best_k);
  const ManifoldSet residual = project_residual(centered, basis);

  PreprocessedSet out = normalize_centers(residual);
  out.basis = basis;
  out.rho_center_pre = pre.rho_center;
  out.rho_center_post = compute_centers(residual, options.corr_mode).rho_center;
  return out;
}

}  // namespace mfld
