#include <algorithm>
#include <cmath>
#include <map>

#include "mfld/empirical.hpp"
#include "mfld/error.hpp"
#include "mfld/mft.hpp"
#include "mfld/rng.hpp"

namespace mfld {

namespace {

constexpr std::uint64_t kSharedProjectionStream = 0x5348415245440000ULL;

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  Matrix g(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) g(r, c) = rng.normal();
  }
  return g;
}

}  // namespace

DichotomyExperiment::DichotomyExperiment(const ManifoldSet& mset)
    : feature_dim_(mset.feature_dim()), total_points_(mset.total_points()), mean_size_(mset.mean_size()) {
  // Each manifold is its mean plus coordinates in an orthonormal basis of its
  // spread; all means and bases are then expressed in one canonical frame.
  std::vector<LocalManifold> locals;
  locals.reserve(mset.size());
  Index generators = 0;
  for (const auto& m : mset.manifolds()) {
    const Vector origin = m.points.colwise().mean().transpose();
    locals.push_back(build_local_frame(m.points, origin));
    generators += 1 + locals.back().dim();
  }
  Matrix gen(feature_dim_, generators);
  Index col = 0;
  for (auto& l : locals) {
    gen.col(col++) = l.center;
    // Carry the spread in the generators so they scale with the data.
    for (Index k = 0; k < l.dim(); ++k) {
      const double spread = l.coords.col(k).norm() / std::sqrt(static_cast<double>(l.points()));
      gen.col(col + k) = spread * l.basis.col(k);
      if (spread > 0.0) l.coords.col(k) /= spread;
    }
    col += l.dim();
  }

  Eigen::BDCSVD<Matrix> svd(gen, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double scale = gen.colwise().norm().maxCoeff();
  rank_ = 0;
  while (rank_ < s.size() && s(rank_) > std::max(1e-12 * s(0), 1e-14 * scale)) ++rank_;
  // Unit top singular value, so a global rescaling of the data leaves the
  // frame and every separability decision unchanged.
  Matrix frame = (s.head(rank_) / s(0)).asDiagonal() * svd.matrixV().leftCols(rank_).transpose();  // rank x K
  for (Index r = 0; r < rank_; ++r) {
    Index arg = 0;
    frame.row(r).cwiseAbs().maxCoeff(&arg);
    if (frame(r, arg) < 0) frame.row(r) *= -1.0;
  }

  col = 0;
  for (auto& l : locals) {
    Part part;
    part.origin = frame.col(col++);
    part.basis = frame.middleCols(col, l.dim());
    col += l.dim();
    part.coords = std::move(l.coords);
    parts_.push_back(std::move(part));
  }
}

Matrix DichotomyExperiment::signed_points(const std::vector<Matrix>& projected, std::span<const int> signs,
                                          Index n_features) const {
  Matrix a(total_points_, n_features + 1);
  Index row = 0;
  for (std::size_t mu = 0; mu < parts_.size(); ++mu) {
    const Part& p = parts_[mu];
    const Matrix& proj = projected[mu];  // (1 + d) x n_features
    const Index m = p.coords.rows();
    auto block = a.block(row, 0, m, n_features);
    block.rowwise() = proj.row(0);
    if (p.coords.cols() > 0) block.noalias() += p.coords * proj.bottomRows(p.coords.cols());
    a.block(row, n_features, m, 1).setOnes();
    a.middleRows(row, m) *= static_cast<double>(signs[mu]);
    row += m;
  }
  return a;
}

CurvePoint DichotomyExperiment::fraction(Index n_features, std::uint64_t seed,
                                         const SeparabilityOptions& options) const {
  require(n_features >= 1, ErrorCode::InvalidArgument, "feature count must be positive");
  require(options.n_dichotomies >= 1, ErrorCode::InvalidArgument, "need at least one dichotomy");

  // A Gaussian map onto at least rank_ dimensions is injective on the span and
  // leaves separability unchanged, so the canonical coordinates are used as is.
  const bool project = n_features < rank_;
  const Index width = project ? n_features : rank_;

  auto project_parts = [&](const Matrix& h) {
    std::vector<Matrix> out;
    out.reserve(parts_.size());
    for (const Part& p : parts_) {
      Matrix proj(1 + p.basis.cols(), width);
      if (project) {
        proj.row(0).noalias() = p.origin.transpose() * h;
        if (p.basis.cols() > 0) proj.bottomRows(p.basis.cols()).noalias() = p.basis.transpose() * h;
      } else {
        proj.row(0) = p.origin.transpose();
        if (p.basis.cols() > 0) proj.bottomRows(p.basis.cols()) = p.basis.transpose();
      }
      out.push_back(std::move(proj));
    }
    return out;
  };

  std::vector<Matrix> shared;
  if (options.shared_projection) {
    Rng rng(derive_seed(seed, kSharedProjectionStream + static_cast<std::uint64_t>(n_features)));
    shared = project_parts(project ? gaussian(rank_, n_features, rng) : Matrix());
  }

  CurvePoint point;
  point.n_features = n_features;
  point.n_dichotomies = options.n_dichotomies;
  std::size_t separable = 0;
  for (std::size_t trial = 0; trial < options.n_dichotomies; ++trial) {
    const std::uint64_t trial_seed = derive_seed(seed, trial);
    const std::vector<int> signs = random_dichotomy(parts_.size(), trial_seed);
    std::vector<Matrix> projected;
    if (!options.shared_projection) {
      Rng rng(derive_seed(trial_seed, static_cast<std::uint64_t>(n_features)));
      projected = project_parts(project ? gaussian(rank_, n_features, rng) : Matrix());
    }
    const auto result = check_separability_signed(
        signed_points(options.shared_projection ? shared : projected, signs, width));
    if (result.separable()) ++separable;
    if (result.verdict == Separability::Marginal) ++point.n_marginal;
  }
  point.fraction = static_cast<double>(separable) / static_cast<double>(options.n_dichotomies);
  return point;
}

double fraction_separable(const ManifoldSet& mset, Index n_features, std::size_t n_dichotomies, std::uint64_t seed,
                          bool shared_projection) {
  return DichotomyExperiment(mset).fraction(n_features, seed, {n_dichotomies, shared_projection}).fraction;
}

CapacityEstimate empirical_capacity(const ManifoldSet& mset, std::size_t n_dichotomies, std::uint64_t seed,
                                    double frac_tol, bool shared_projection) {
  require(frac_tol >= 0.0 && frac_tol < 0.5, ErrorCode::InvalidArgument, "frac_tol must lie in [0, 0.5)");
  const DichotomyExperiment experiment(mset);
  const SeparabilityOptions options{n_dichotomies, shared_projection};
  const Index max_n = mset.feature_dim();

  CapacityEstimate est;
  std::map<Index, double> seen;
  auto eval = [&](Index n) {
    auto it = seen.find(n);
    if (it != seen.end()) return it->second;
    const CurvePoint point = experiment.fraction(n, seed, options);
    est.curve.push_back(point);
    seen[n] = point.fraction;
    return point.fraction;
  };
  auto within = [&](double f) { return std::abs(f - 0.5) <= frac_tol; };
  auto finish = [&](Index n) {
    est.critical_n = n;
    est.fraction_at_critical = seen.at(n);
    est.alpha_sim = static_cast<double>(mset.size()) / static_cast<double>(n);
    return est;
  };

  const auto start = std::clamp<Index>(
      static_cast<Index>(std::llround(static_cast<double>(mset.size()) * mset.mean_size() / 2.0)), 1, max_n);
  const double f0 = eval(start);
  if (within(f0)) return finish(start);

  Index lo = 0;
  Index hi = 0;
  if (f0 > 0.5) {
    hi = start;
    for (Index n = start;;) {
      if (n == 1) throw NotBracketableError("fraction stays above 1/2 down to one feature", est.curve);
      n = std::max<Index>(1, n / 2);
      const double f = eval(n);
      if (within(f)) return finish(n);
      if (f < 0.5) {
        lo = n;
        break;
      }
      hi = n;
    }
  } else {
    lo = start;
    for (Index n = start;;) {
      if (n == max_n) throw NotBracketableError("fraction stays below 1/2 up to all features", est.curve);
      n = std::min(max_n, 2 * n);
      const double f = eval(n);
      if (within(f)) return finish(n);
      if (f > 0.5) {
        hi = n;
        break;
      }
      lo = n;
    }
  }

  while (hi - lo > std::max<Index>(1, static_cast<Index>(0.02 * static_cast<double>(lo)))) {
    const Index mid = lo + (hi - lo) / 2;
    const double f = eval(mid);
    if (within(f)) return finish(mid);
    if (f > 0.5) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return finish(std::abs(seen.at(lo) - 0.5) < std::abs(seen.at(hi) - 0.5) ? lo : hi);
}

}  // namespace mfld
