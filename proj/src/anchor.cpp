#include <algorithm>
#include <cmath>

#include "mfld/error.hpp"
#include "mfld/mft.hpp"

namespace mfld {

Matrix LocalManifold::embedded() const {
  Matrix s(points(), dim() + 1);
  s.leftCols(dim()) = coords;
  s.col(dim()).setOnes();
  return s;
}

LocalManifold build_local_frame(const Matrix& manifold, const Vector& center) {
  require(center.size() == manifold.cols(), ErrorCode::InvalidArgument, "center dimension mismatch");
  LocalManifold local;
  local.center = center;
  const Index m = manifold.rows();
  const Index n = manifold.cols();
  const Matrix spread = manifold.rowwise() - center.transpose();
  const double extent = std::max(manifold.rowwise().norm().maxCoeff(), center.norm());

  Index rank = 0;
  Matrix u;
  Matrix v;
  Vector s;
  if (m > 1 && spread.norm() > 0.0) {
    Eigen::BDCSVD<Matrix> svd(spread, Eigen::ComputeThinU | Eigen::ComputeThinV);
    s = svd.singularValues();
    const double tol = std::max(1e-10 * s(0), 1e-12 * extent);
    while (rank < s.size() && s(rank) > tol) ++rank;
    u = svd.matrixU().leftCols(rank);
    v = svd.matrixV().leftCols(rank);
  }
  local.coords.resize(m, rank);
  local.basis.resize(n, rank);
  for (Index j = 0; j < rank; ++j) {
    Vector c = u.col(j) * s(j);
    Index arg = 0;
    c.cwiseAbs().maxCoeff(&arg);
    // Sign convention that depends only on inner products of the data, so the
    // frame is reproducible under orthogonal transforms of the features.
    const double sign = c(arg) < 0 ? -1.0 : 1.0;
    local.coords.col(j) = sign * c;
    local.basis.col(j) = sign * v.col(j);
  }
  return local;
}

double AnchorSolution::contribution(double kappa) const {
  if (interior || anchor.size() == 0) return 0.0;
  const double num = std::max(sample.dot(anchor) + kappa, 0.0);
  const double den = anchor.squaredNorm();
  return den > 0 ? num * num / den : 0.0;
}

KktResiduals certify(const Matrix& embedded, const AnchorSolution& sol, double kappa) {
  KktResiduals k;
  const Vector slack = embedded * sol.projection;
  for (Index i = 0; i < slack.size(); ++i) {
    const double g = slack(i) + kappa;
    k.feasibility = std::max(k.feasibility, g);
    if (sol.weights.size() == slack.size()) {
      k.slackness = std::max(k.slackness, sol.weights(i) * std::abs(g));
    }
  }
  Vector recon = sol.sample - sol.projection;
  if (sol.weights.size() == embedded.rows()) recon -= embedded.transpose() * sol.weights;
  k.stationarity = recon.norm() / std::max(1.0, sol.sample.norm());
  k.min_weight = sol.weights.size() > 0 ? sol.weights.minCoeff() : 0.0;
  return k;
}

AnchorSolver::AnchorSolver(Matrix embedded, double kappa, int max_iterations)
    : s_(std::move(embedded)), st_(s_.transpose()), kappa_(kappa), max_iterations_(max_iterations) {
  require(kappa >= 0.0, ErrorCode::InvalidArgument, "margin must be nonnegative");
  require(s_.rows() >= 1, ErrorCode::InvalidArgument, "manifold has no points");
}

// Lawson-Hanson active set on the dual: min_{w >= 0} 1/2 |S^T w - T|^2 - kappa sum(w).
// The primal projection is V* = T - S^T w and the dual gradient is -(S V* + kappa).
AnchorSolution AnchorSolver::solve(const Vector& sample) const {
  const Index m = s_.rows();
  const Index d = s_.cols();
  require(sample.size() == d, ErrorCode::InvalidArgument, "sample dimension mismatch");

  AnchorSolution sol;
  sol.sample = sample;
  sol.weights = Vector::Zero(m);

  const double scale = std::max(1.0, sample.norm()) * std::max(1.0, s_.rowwise().norm().maxCoeff());
  const double dual_tol = 1e-12 * scale;

  std::vector<Index> passive;
  std::vector<char> in_passive(static_cast<std::size_t>(m), 0);
  Vector residual = sample;
  Vector grad = s_ * residual;
  grad.array() += kappa_;

  auto solve_passive = [&](Vector& z) {
    const auto k = static_cast<Index>(passive.size());
    Matrix a(d, k);
    for (Index i = 0; i < k; ++i) a.col(i) = st_.col(passive[static_cast<std::size_t>(i)]);
    if (kappa_ == 0.0) {
      z = a.colPivHouseholderQr().solve(sample);
    } else {
      const Matrix gram = a.transpose() * a;
      const Vector rhs = a.transpose() * sample + Vector::Constant(k, kappa_);
      z = gram.completeOrthogonalDecomposition().solve(rhs);
    }
  };

  int iter = 0;
  for (;; ++iter) {
    Index best = -1;
    double best_val = dual_tol;
    for (Index i = 0; i < m; ++i) {
      if (!in_passive[static_cast<std::size_t>(i)] && grad(i) > best_val) {
        best_val = grad(i);
        best = i;
      }
    }
    if (best < 0) break;
    if (iter >= max_iterations_) {
      sol.converged = false;
      break;
    }
    passive.push_back(best);
    in_passive[static_cast<std::size_t>(best)] = 1;

    bool stalled = false;
    for (int inner = 0;; ++inner) {
      Vector z;
      solve_passive(z);
      bool all_positive = true;
      for (Index i = 0; i < z.size(); ++i) {
        if (!(z(i) > 0.0)) {
          all_positive = false;
          break;
        }
      }
      if (all_positive) {
        for (std::size_t i = 0; i < passive.size(); ++i) sol.weights(passive[i]) = z(static_cast<Index>(i));
        break;
      }
      double step = 1.0;
      for (std::size_t i = 0; i < passive.size(); ++i) {
        const double wi = sol.weights(passive[i]);
        const double zi = z(static_cast<Index>(i));
        if (zi <= 0.0) step = std::min(step, wi / (wi - zi));
      }
      for (std::size_t i = 0; i < passive.size(); ++i) {
        Index idx = passive[i];
        sol.weights(idx) += step * (z(static_cast<Index>(i)) - sol.weights(idx));
      }
      std::vector<Index> kept;
      for (Index idx : passive) {
        if (sol.weights(idx) > 1e-15 * std::max(1.0, sol.weights.maxCoeff())) {
          kept.push_back(idx);
        } else {
          sol.weights(idx) = 0.0;
          in_passive[static_cast<std::size_t>(idx)] = 0;
        }
      }
      passive.swap(kept);
      if (passive.empty() || inner > 4 * d + 16) {
        stalled = !passive.empty();
        break;
      }
    }
    if (stalled) {
      sol.converged = false;
      break;
    }

    residual = sample - st_ * sol.weights;
    grad = s_ * residual;
    grad.array() += kappa_;
  }
  sol.iterations = iter;

  const Vector push = st_ * sol.weights;  // T - V*
  sol.projection = sample - push;
  const double total = sol.weights.sum();
  if (passive.empty() || !(total > 0.0)) {
    sol.interior = true;
    sol.lambda = 0.0;
    sol.projection = sample;
    sol.weights.setZero();
    return sol;
  }
  sol.lambda = push.norm();
  sol.anchor = push / total;
  return sol;
}

AnchorSolution solve_anchor(const LocalManifold& local, const Vector& sample, double kappa) {
  return AnchorSolver(local.embedded(), kappa).solve(sample);
}

}  // namespace mfld
