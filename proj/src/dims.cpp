#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfld/dims.hpp"
#include "mfld/error.hpp"
#include "mfld/rng.hpp"

namespace mfld {

Vector eigenspectrum(const Matrix& rows) {
  const Index n = rows.rows();
  require(n >= 2, ErrorCode::InvalidArgument, "eigenspectrum needs at least 2 rows");
  require(rows.allFinite(), ErrorCode::InvalidArgument, "non-finite data");
  const Matrix centered = rows.rowwise() - rows.colwise().mean();
  const double denom = static_cast<double>(n - 1);
  // The nonzero spectrum of X^T X equals that of X X^T; use the smaller one.
  const Matrix cov = n <= rows.cols() ? Matrix(centered * centered.transpose() / denom)
                                      : Matrix(centered.transpose() * centered / denom);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  require(eig.info() == Eigen::Success, ErrorCode::Numerical, "eigen decomposition failed");
  Vector ev = eig.eigenvalues().reverse();
  const double top = std::max(ev.size() > 0 ? ev(0) : 0.0, 0.0);
  for (Index i = 0; i < ev.size(); ++i) {
    require(ev(i) >= -1e-10 * top, ErrorCode::Numerical, "covariance has a significantly negative eigenvalue");
    if (ev(i) <= 1e-12 * top) ev(i) = 0.0;
  }
  return ev;
}

double participation_ratio(const Vector& spectrum) {
  require(spectrum.size() > 0 && spectrum.maxCoeff() > 0.0, ErrorCode::InvalidArgument,
          "participation ratio needs a positive eigenvalue");
  require(spectrum.minCoeff() >= 0.0, ErrorCode::InvalidArgument, "spectrum must be nonnegative");
  const double sum = spectrum.sum();
  return sum * sum / spectrum.squaredNorm();
}

Index explained_variance_dim(const Vector& spectrum, double threshold) {
  require(threshold > 0.0 && threshold <= 1.0, ErrorCode::InvalidArgument, "threshold must lie in (0, 1]");
  require(spectrum.size() > 0 && spectrum.minCoeff() >= 0.0, ErrorCode::InvalidArgument,
          "spectrum must be nonnegative");
  Vector sorted = spectrum;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double total = sorted.sum();
  require(total > 0.0, ErrorCode::InvalidArgument, "total variance must be positive");
  double acc = 0.0;
  Index positive = 0;
  for (Index k = 0; k < sorted.size(); ++k) {
    if (sorted(k) <= 0.0) break;
    positive = k + 1;
    acc += sorted(k);
    // Relative slack keeps threshold 1.0 from failing on rounding of the sum.
    if (acc >= threshold * total * (1.0 - 1e-12)) return k + 1;
  }
  return positive;
}

SpectrumMetrics spectrum_metrics(const Matrix& rows, double variance_threshold) {
  SpectrumMetrics m;
  m.eigenvalues = eigenspectrum(rows);
  m.participation_ratio = participation_ratio(m.eigenvalues);
  m.explained_variance_dim = explained_variance_dim(m.eigenvalues, variance_threshold);
  m.variance_threshold = variance_threshold;
  return m;
}

namespace {

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
};

// Row-wise softmax in place; returns the mean cross-entropy against `labels`.
double softmax_loss(Matrix& logits, const std::vector<Index>& labels) {
  double loss = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - top).exp();
    const double z = logits.row(i).sum();
    logits.row(i) /= z;
    loss -= std::log(std::max(logits(i, labels[static_cast<std::size_t>(i)]), 1e-300));
  }
  return loss / static_cast<double>(logits.rows());
}

class SoftmaxModel {
 public:
  SoftmaxModel(const Matrix& x, const std::vector<Index>& y, Index classes, double l2)
      : x_(x), y_(y), classes_(classes), l2_(l2) {}

  // Loss and gradient at w ((F+1) x C, bias in the last row).
  double evaluate(const Matrix& w, Matrix* grad) const {
    Matrix prob = x_ * w;
    double loss = softmax_loss(prob, y_) + 0.5 * l2_ * w.topRows(w.rows() - 1).squaredNorm();
    if (grad) {
      for (Index i = 0; i < prob.rows(); ++i) prob(i, y_[static_cast<std::size_t>(i)]) -= 1.0;
      *grad = x_.transpose() * prob / static_cast<double>(x_.rows());
      grad->topRows(w.rows() - 1) += l2_ * w.topRows(w.rows() - 1);
    }
    return loss;
  }

  Matrix fit(double grad_tol, int max_iterations) const {
    Matrix w = Matrix::Zero(x_.cols(), classes_);
    Matrix grad;
    double loss = evaluate(w, &grad);
    double step = 1.0;
    for (int it = 0; it < max_iterations; ++it) {
      const double gnorm_sq = grad.squaredNorm();
      if (std::sqrt(gnorm_sq) <= grad_tol) break;
      // Armijo backtracking, then let the step grow again.
      Matrix next;
      double next_loss = 0.0;
      for (;;) {
        next = w - step * grad;
        next_loss = evaluate(next, nullptr);
        if (next_loss <= loss - 0.5 * step * gnorm_sq || step < 1e-12) break;
        step *= 0.5;
      }
      w.swap(next);
      loss = evaluate(w, &grad);
      step *= 2.0;
    }
    return w;
  }

 private:
  const Matrix& x_;
  const std::vector<Index>& y_;
  Index classes_;
  double l2_;
};

}  // namespace

ProbeResult classifier_probe(const ManifoldSet& mset, std::uint64_t seed, const ProbeOptions& options) {
  require(options.n_splits >= 1, ErrorCode::InvalidArgument, "need at least one split");
  require(options.train_frac > 0.0 && options.train_frac < 1.0, ErrorCode::InvalidArgument,
          "train fraction must lie in (0, 1)");
  ProbeResult result;
  result.train_frac = options.train_frac;

  std::vector<std::size_t> classes;
  for (std::size_t mu = 0; mu < mset.size(); ++mu) {
    if (mset[mu].points.rows() >= 2) {
      classes.push_back(mu);
    } else {
      result.excluded.push_back(mset[mu].label);
    }
  }
  require(classes.size() >= 2, ErrorCode::TooFewManifolds, "probe needs 2 classes with at least 2 points");

  const Index f = mset.feature_dim();
  std::vector<Index> offsets;
  Index total = 0;
  for (std::size_t c : classes) {
    offsets.push_back(total);
    total += mset[c].points.rows();
  }
  Matrix pooled(total, f);
  std::vector<Index> labels(static_cast<std::size_t>(total));
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const Matrix& pts = mset[classes[k]].points;
    pooled.middleRows(offsets[k], pts.rows()) = pts;
    std::fill_n(labels.begin() + offsets[k], pts.rows(), static_cast<Index>(k));
  }

  for (std::size_t s = 0; s < options.n_splits; ++s) {
    Rng rng(derive_seed(seed, s));
    Split split;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const Index m = mset[classes[k]].points.rows();
      std::vector<Index> idx(static_cast<std::size_t>(m));
      std::iota(idx.begin(), idx.end(), offsets[k]);
      for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
      const auto n_train = std::clamp<Index>(
          static_cast<Index>(std::llround(options.train_frac * static_cast<double>(m))), 1, m - 1);
      split.train.insert(split.train.end(), idx.begin(), idx.begin() + n_train);
      split.test.insert(split.test.end(), idx.begin() + n_train, idx.end());
    }

    // Standardize with training statistics.
    auto gather = [&](const std::vector<Index>& rows) {
      Matrix out(static_cast<Index>(rows.size()), f + 1);
      for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)).head(f) = pooled.row(rows[i]);
      out.col(f).setOnes();
      return out;
    };
    Matrix train = gather(split.train);
    Matrix test = gather(split.test);
    const Eigen::RowVectorXd mean = train.leftCols(f).colwise().mean();
    Eigen::RowVectorXd sd =
        ((train.leftCols(f).rowwise() - mean).colwise().squaredNorm() / static_cast<double>(train.rows())).cwiseSqrt();
    for (Index j = 0; j < f; ++j) sd(j) = sd(j) > 0.0 ? 1.0 / sd(j) : 0.0;
    train.leftCols(f) = ((train.leftCols(f).rowwise() - mean).array().rowwise() * sd.array()).matrix();
    test.leftCols(f) = ((test.leftCols(f).rowwise() - mean).array().rowwise() * sd.array()).matrix();

    std::vector<Index> y_train;
    for (Index r : split.train) y_train.push_back(labels[static_cast<std::size_t>(r)]);
    const SoftmaxModel model(train, y_train, static_cast<Index>(classes.size()), options.l2);
    const Matrix w = model.fit(options.grad_tol, options.max_iterations);

    const Matrix scores = test * w;
    std::size_t correct = 0;
    for (Index i = 0; i < scores.rows(); ++i) {
      Index arg = 0;
      scores.row(i).maxCoeff(&arg);
      if (arg == labels[static_cast<std::size_t>(split.test[static_cast<std::size_t>(i)])]) ++correct;
    }
    result.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(scores.rows()));
  }

  const auto n = static_cast<double>(result.accuracies.size());
  result.mean = std::accumulate(result.accuracies.begin(), result.accuracies.end(), 0.0) / n;
  if (result.accuracies.size() > 1) {
    double ss = 0.0;
    for (double a : result.accuracies) ss += (a - result.mean) * (a - result.mean);
    result.stderr_mean = std::sqrt(ss / (n - 1.0) / n);
  }
  return result;
}

}  // namespace mfld
