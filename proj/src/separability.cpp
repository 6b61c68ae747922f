#include <algorithm>
#include <cmath>

#include "mfld/empirical.hpp"
#include "mfld/error.hpp"
#include "mfld/rng.hpp"

namespace mfld {

namespace {

constexpr double kZeroDistance = 1e-12;
constexpr double kMarginalBand = 1e-9;

Separability classify_distance(double distance, double margin) {
  if (distance <= kZeroDistance) return Separability::Inseparable;
  if (distance > margin + kMarginalBand) return Separability::Separable;
  if (distance < margin - kMarginalBand) return Separability::Inseparable;
  return Separability::Marginal;
}

// Affine minimizer over the corral: weights proportional to (G + 11^T)^{-1} 1.
bool affine_weights(const Matrix& gram, Vector& alpha) {
  const Index k = gram.rows();
  Matrix b = gram;
  b.array() += 1.0;
  const Vector ones = Vector::Ones(k);
  Eigen::LLT<Matrix> llt(b);
  Vector z;
  if (llt.info() == Eigen::Success) {
    z = llt.solve(ones);
  } else {
    z = b.completeOrthogonalDecomposition().solve(ones);
  }
  const double total = z.sum();
  if (!std::isfinite(total) || total == 0.0) return false;
  alpha = z / total;
  return alpha.allFinite();
}

}  // namespace

// Wolfe's minimum-norm-point algorithm on conv{a_i}. The rows are separable
// with normalized margin m exactly when dist(0, conv) > m; any iterate x with
// min_i a_i.x > 0 is already a separating direction.
SeparabilityResult check_separability_signed(Matrix a, double margin) {
  require(margin >= 0.0, ErrorCode::InvalidArgument, "margin must be nonnegative");
  const Index n = a.rows();
  const Index d = a.cols();
  require(n >= 1 && d >= 1, ErrorCode::InvalidArgument, "empty separability problem");
  for (Index i = 0; i < n; ++i) {
    const double norm = a.row(i).norm();
    require(norm > 0.0 && std::isfinite(norm), ErrorCode::InvalidArgument, "zero or non-finite row");
    a.row(i) /= norm;
  }

  SeparabilityResult result;
  std::vector<Index> corral{0};
  Vector lambda = Vector::Ones(1);
  Matrix gram = Matrix::Ones(1, 1);
  Vector x = a.row(0).transpose();

  const std::size_t max_major = 50 * static_cast<std::size_t>(d + 1) + 1000;
  Vector g(n);
  Vector alpha;
  for (std::size_t major = 0;; ++major) {
    result.iterations = major;
    const double xn = x.norm();
    if (xn <= kZeroDistance) {
      result.verdict = Separability::Inseparable;
      result.distance = xn;
      return result;
    }
    g.noalias() = a * x;
    Index j = 0;
    const double gmin = g.minCoeff(&j);
    if (gmin > 0.0 && gmin / xn > margin + kMarginalBand) {
      result.verdict = Separability::Separable;
      result.distance = xn;
      result.weights = x / xn;
      return result;
    }
    if (xn < margin - kMarginalBand) {
      result.verdict = Separability::Inseparable;
      result.distance = xn;
      return result;
    }
    const bool optimal = xn * xn - gmin <= 1e-14;
    const bool stalled = std::find(corral.begin(), corral.end(), j) != corral.end();
    if (optimal || stalled || major >= max_major) {
      result.distance = xn;
      result.verdict = major >= max_major ? Separability::Marginal : classify_distance(xn, margin);
      if (result.verdict == Separability::Separable) result.weights = x / xn;
      return result;
    }

    // Grow the corral by the most violating row.
    const auto k = static_cast<Index>(corral.size());
    Vector cross(k);
    for (Index c = 0; c < k; ++c) cross(c) = a.row(corral[static_cast<std::size_t>(c)]).dot(a.row(j));
    gram.conservativeResize(k + 1, k + 1);
    gram.block(0, k, k, 1) = cross;
    gram.block(k, 0, 1, k) = cross.transpose();
    gram(k, k) = 1.0;
    corral.push_back(j);
    lambda.conservativeResize(k + 1);
    lambda(k) = 0.0;

    for (Index minor = 0; minor <= d + 2; ++minor) {
      if (!affine_weights(gram, alpha)) break;
      if (alpha.minCoeff() > 1e-14) {
        lambda = alpha;
        break;
      }
      double theta = 1.0;
      Index drop = -1;
      for (Index i = 0; i < alpha.size(); ++i) {
        if (alpha(i) <= 1e-14) {
          const double denom = lambda(i) - alpha(i);
          const double t = denom > 0 ? lambda(i) / denom : 0.0;
          if (t < theta) {
            theta = t;
            drop = i;
          }
        }
      }
      lambda += theta * (alpha - lambda);
      if (drop >= 0) lambda(drop) = 0.0;

      std::vector<Index> keep;
      for (Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) > 1e-14) keep.push_back(i);
      }
      if (keep.empty()) {
        keep.push_back(static_cast<Index>(corral.size()) - 1);
        lambda(keep.front()) = 1.0;
      }
      std::vector<Index> next_corral;
      Vector next_lambda(static_cast<Index>(keep.size()));
      Matrix next_gram(static_cast<Index>(keep.size()), static_cast<Index>(keep.size()));
      for (std::size_t r = 0; r < keep.size(); ++r) {
        next_corral.push_back(corral[static_cast<std::size_t>(keep[r])]);
        next_lambda(static_cast<Index>(r)) = lambda(keep[r]);
        for (std::size_t c = 0; c < keep.size(); ++c) {
          next_gram(static_cast<Index>(r), static_cast<Index>(c)) = gram(keep[r], keep[c]);
        }
      }
      corral.swap(next_corral);
      lambda = next_lambda / next_lambda.sum();
      gram.swap(next_gram);
    }

    x.setZero();
    for (std::size_t c = 0; c < corral.size(); ++c) x += lambda(static_cast<Index>(c)) * a.row(corral[c]).transpose();
  }
}

SeparabilityResult check_separability(const Matrix& points, std::span<const int> signs, double margin) {
  require(static_cast<Index>(signs.size()) == points.rows(), ErrorCode::InvalidArgument,
          "one sign per row is required");
  Matrix a(points.rows(), points.cols() + 1);
  for (Index i = 0; i < points.rows(); ++i) {
    const int y = signs[static_cast<std::size_t>(i)];
    require(y == 1 || y == -1, ErrorCode::InvalidArgument, "signs must be +1 or -1");
    a.row(i).head(points.cols()) = y * points.row(i);
    a(i, points.cols()) = y;
  }
  return check_separability_signed(std::move(a), margin);
}

bool is_separable(const Matrix& points, std::span<const int> signs, double margin) {
  return check_separability(points, signs, margin).separable();
}

std::vector<int> random_dichotomy(std::size_t p, std::uint64_t seed) {
  require(p >= 2, ErrorCode::TooFewManifolds, "a dichotomy needs at least 2 manifolds");
  Rng rng(seed);
  std::vector<int> signs(p);
  for (;;) {
    int sum = 0;
    for (auto& s : signs) {
      s = (rng.next() >> 63) ? 1 : -1;
      sum += s;
    }
    if (std::abs(sum) != static_cast<int>(p)) return signs;
  }
}

}  // namespace mfld
