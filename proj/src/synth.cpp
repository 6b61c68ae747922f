#include <cmath>
#include <cstdio>

#include "mfld/error.hpp"
#include "mfld/rng.hpp"
#include "mfld/synth.hpp"

namespace mfld {

namespace {

constexpr std::uint64_t kSharedCenterStream = 0xC0FFEE0000000001ULL;

Vector gaussian_vector(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Vector unit_gaussian(Index n, Rng& rng) {
  Vector v = gaussian_vector(n, rng);
  return v / v.norm();
}

std::string label_for(std::size_t mu, std::size_t p) {
  const int width = static_cast<int>(std::to_string(p - 1).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "m%0*zu", width, mu);
  return buf;
}

}  // namespace

SynthFamily parse_family(const std::string& name) {
  if (name == "ball") return SynthFamily::Ball;
  if (name == "gaussian-cloud") return SynthFamily::GaussianCloud;
  if (name == "correlated-centers") return SynthFamily::CorrelatedCenters;
  fail(ErrorCode::InvalidArgument, "unknown synthetic family '" + name + "'");
}

std::string to_string(SynthFamily family) {
  switch (family) {
    case SynthFamily::Ball:
      return "ball";
    case SynthFamily::GaussianCloud:
      return "gaussian-cloud";
    case SynthFamily::CorrelatedCenters:
      return "correlated-centers";
  }
  return "?";
}

void SynthSpec::validate() const {
  require(P >= 2, ErrorCode::TooFewManifolds, "synthetic set needs P >= 2");
  require(M >= 1 && N >= 1, ErrorCode::InvalidArgument, "M and N must be positive");
  require(R >= 0.0 && std::isfinite(R), ErrorCode::InvalidArgument, "R must be a finite nonnegative number");
  if (family == SynthFamily::Ball) {
    require(D >= 1, ErrorCode::InvalidArgument, "ball dimension must be positive");
    require(D < N, ErrorCode::InvalidArgument, "ball dimension must be below N");
    require(R == 0.0 || D <= M - 1, ErrorCode::InvalidArgument, "ball dimension must be at most M - 1");
  }
  if (family == SynthFamily::CorrelatedCenters) {
    require(center_corr >= 0.0 && center_corr < 1.0, ErrorCode::InvalidArgument,
            "center correlation must lie in [0, 1)");
  }
}

ManifoldSet make_ball_manifolds(const SynthSpec& spec) {
  require(spec.family == SynthFamily::Ball, ErrorCode::InvalidArgument, "spec is not a ball family");
  spec.validate();
  std::vector<Manifold> out;
  out.reserve(spec.P);
  for (std::size_t mu = 0; mu < spec.P; ++mu) {
    Rng rng(derive_seed(spec.seed, mu));
    const Vector center = unit_gaussian(spec.N, rng);
    Matrix frame(spec.N, spec.D + 1);
    frame.col(0) = center;
    for (Index j = 1; j <= spec.D; ++j) frame.col(j) = gaussian_vector(spec.N, rng);
    // Orthonormal directions orthogonal to the center.
    const Matrix q = Eigen::HouseholderQR<Matrix>(frame).householderQ() * Matrix::Identity(spec.N, spec.D + 1);
    const Matrix basis = q.rightCols(spec.D);

    Matrix coeff(spec.M, spec.D);
    for (Index i = 0; i < spec.M; ++i) {
      Vector u = unit_gaussian(spec.D, rng);
      if (spec.solid) u *= std::pow(rng.uniform(), 1.0 / static_cast<double>(spec.D));
      coeff.row(i) = spec.R * u.transpose();
    }
    Matrix pts = coeff * basis.transpose();
    pts.rowwise() += center.transpose();
    out.push_back({label_for(mu, spec.P), std::move(pts)});
  }
  return ManifoldSet(std::move(out));
}

ManifoldSet make_gaussian_clouds(const SynthSpec& spec) {
  require(spec.family != SynthFamily::Ball, ErrorCode::InvalidArgument, "spec is not a cloud family");
  spec.validate();
  const bool correlated = spec.family == SynthFamily::CorrelatedCenters && spec.center_corr > 0.0;
  Vector shared;
  if (correlated) {
    Rng rng(derive_seed(spec.seed, kSharedCenterStream));
    shared = unit_gaussian(spec.N, rng);
  }
  const double noise = spec.R / std::sqrt(static_cast<double>(spec.N));
  std::vector<Manifold> out;
  out.reserve(spec.P);
  for (std::size_t mu = 0; mu < spec.P; ++mu) {
    Rng rng(derive_seed(spec.seed, mu));
    Vector center = unit_gaussian(spec.N, rng);
    if (correlated) {
      center = std::sqrt(spec.center_corr) * shared + std::sqrt(1.0 - spec.center_corr) * center;
      center.normalize();
    }
    Matrix pts(spec.M, spec.N);
    for (Index i = 0; i < spec.M; ++i) pts.row(i) = center.transpose() + noise * gaussian_vector(spec.N, rng).transpose();
    out.push_back({label_for(mu, spec.P), std::move(pts)});
  }
  return ManifoldSet(std::move(out));
}

ManifoldSet make_synthetic(const SynthSpec& spec) {
  return spec.family == SynthFamily::Ball ? make_ball_manifolds(spec) : make_gaussian_clouds(spec);
}

ActivationStore to_store(const ManifoldSet& mset, const std::string& layer, const std::string& label_key,
                         DType dtype) {
  ActivationStore store;
  const Index n = mset.feature_dim();
  const auto rows = static_cast<std::uint64_t>(mset.total_points());
  Layer l;
  l.name = layer;
  l.shape = {rows, 1, static_cast<std::uint64_t>(n)};
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(n));
  for (std::size_t mu = 0; mu < mset.size(); ++mu) {
    const Matrix& pts = mset[mu].points;
    for (Index i = 0; i < pts.rows(); ++i) {
      for (Index j = 0; j < n; ++j) data.push_back(pts(i, j));
      ExampleEntry e;
      e.id = mset[mu].label + "_" + std::to_string(i);
      e.labels[label_key] = mset[mu].label;
      store.manifest.examples.push_back(std::move(e));
    }
  }
  if (dtype == DType::F32) {
    l.data = std::vector<float>(data.begin(), data.end());
  } else {
    l.data = std::move(data);
  }
  store.layers.push_back(std::move(l));
  store.manifest.layers.push_back(layer);
  return store;
}

}  // namespace mfld
