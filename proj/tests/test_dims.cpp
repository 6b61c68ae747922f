#include <doctest.h>

#include <cmath>

#include "mfld/dims.hpp"
#include "mfld/error.hpp"
#include "mfld/rng.hpp"
#include "mfld/synth.hpp"
#include "oracles.hpp"

using namespace mfld;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ManifoldSet clouds(std::size_t p, Index m, Index n, double r, std::uint64_t seed) {
  SynthSpec s;
  s.family = SynthFamily::GaussianCloud;
  s.P = p;
  s.M = m;
  s.N = n;
  s.R = r;
  s.seed = seed;
  return make_gaussian_clouds(s);
}

}  // namespace

TEST_CASE("participation ratio examples") {
  CHECK(participation_ratio(vec({1, 1, 1, 1})) == doctest::Approx(4.0));
  CHECK(participation_ratio(vec({1, 0, 0, 0})) == doctest::Approx(1.0));
  CHECK(participation_ratio(vec({2, 1})) == doctest::Approx(9.0 / 5.0));
  CHECK(participation_ratio(Vector::Constant(50, 0.3)) == doctest::Approx(50.0));
}

TEST_CASE("explained variance dimension examples") {
  CHECK(explained_variance_dim(vec({5, 3, 1, 1}), 0.8) == 2);
  CHECK(explained_variance_dim(vec({5, 3, 1, 1}), 0.9) == 3);
  CHECK(explained_variance_dim(vec({1, 1, 1, 1}), 0.5) == 2);
  CHECK(explained_variance_dim(vec({1, 3, 5, 1}), 0.8) == 2);  // order does not matter
  CHECK(explained_variance_dim(vec({1, 0, 0}), 0.999) == 1);
  CHECK(explained_variance_dim(vec({1, 1, 1}), 1.0) == 3);
}

TEST_CASE("dimension bounds hold on random spectra") {
  Rng rng(3);
  for (int k = 0; k < 500; ++k) {
    const Index n = 1 + static_cast<Index>(rng.below(40));
    Vector s(n);
    for (Index i = 0; i < n; ++i) s(i) = rng.uniform() * (rng.below(4) == 0 ? 0.0 : 1.0);
    s(0) += 1e-3;
    const Index positive = (s.array() > 0).count();
    const double pr = participation_ratio(s);
    CHECK(pr >= 1.0 - 1e-12);
    CHECK(pr <= double(positive) + 1e-9);
    const double thr = 0.05 + 0.95 * rng.uniform();
    const Index ev = explained_variance_dim(s, thr);
    CHECK(ev >= 1);
    CHECK(ev <= positive);
    CHECK(explained_variance_dim(s, std::min(1.0, thr + 0.05)) >= ev);
  }
}

TEST_CASE("eigenspectrum matches the direct covariance") {
  Rng rng(9);
  for (auto [n, f] : std::vector<std::pair<Index, Index>>{{30, 8}, {6, 40}, {2, 3}}) {
    Matrix x(n, f);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() + 3.0;
    const Vector got = eigenspectrum(x);
    const Vector want = oracle::covariance_eigenvalues(x);
    for (Index i = 0; i < std::min(got.size(), want.size()); ++i) {
      CHECK(got(i) == doctest::Approx(want(i)).epsilon(1e-9).scale(want(0)));
    }
    for (Index i = 1; i < got.size(); ++i) CHECK(got(i) <= got(i - 1));
    CHECK(got.minCoeff() >= 0.0);
    CHECK(got.sum() == doctest::Approx(want.sum()).epsilon(1e-9));
  }
}

TEST_CASE("spectrum metrics are rotation and scale invariant") {
  Rng rng(4);
  Matrix x(50, 20);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * (1.0 + double(i % 20));
  const Matrix q = oracle::random_orthogonal(20, 8);
  const SpectrumMetrics a = spectrum_metrics(x);
  const SpectrumMetrics b = spectrum_metrics(3.7 * x * q);
  CHECK(std::abs(a.participation_ratio - b.participation_ratio) <= 1e-9 * a.participation_ratio);
  CHECK(a.explained_variance_dim == b.explained_variance_dim);
}

TEST_CASE("isotropic and low-rank clouds") {
  Rng rng(12);
  Matrix iso(4000, 10);
  for (Index i = 0; i < iso.size(); ++i) iso.data()[i] = rng.normal();
  CHECK(spectrum_metrics(iso).participation_ratio == doctest::Approx(10.0).epsilon(0.05));

  Matrix flat = Matrix::Zero(100, 12);
  for (Index i = 0; i < 100; ++i) {
    flat(i, 0) = rng.normal();
    flat(i, 5) = rng.normal();
  }
  const SpectrumMetrics m = spectrum_metrics(flat, 0.99);
  CHECK(m.participation_ratio <= 2.0 + 1e-12);
  CHECK(m.explained_variance_dim == 2);
  CHECK(m.eigenvalues.size() >= 2);

  Matrix single(1, 4);
  single << 1, 2, 3, 4;
  CHECK_THROWS_AS(spectrum_metrics(single), Error);
}

TEST_CASE("probe accuracy tracks separation") {
  ProbeOptions opt;
  opt.n_splits = 5;
  const ProbeResult tight = classifier_probe(clouds(8, 30, 40, 0.2, 1), 7, opt);
  const ProbeResult loose = classifier_probe(clouds(8, 30, 40, 8.0, 1), 7, opt);
  CHECK(tight.mean >= 0.95);
  CHECK(loose.mean < tight.mean);
  CHECK(tight.accuracies.size() == 5);
  CHECK(tight.stderr_mean >= 0.0);
  for (double a : tight.accuracies) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }

  const ProbeResult again = classifier_probe(clouds(8, 30, 40, 0.2, 1), 7, opt);
  CHECK(again.accuracies == tight.accuracies);
}

TEST_CASE("probe on permuted labels is at chance") {
  ProbeOptions opt;
  opt.n_splits = 8;
  const ManifoldSet m = clouds(5, 40, 30, 1.0, 2);
  const ProbeResult r = classifier_probe(permute_labels(m, 9), 3, opt);
  CHECK(std::abs(r.mean - 0.2) <= 3.0 * r.stderr_mean + 0.05);
}

TEST_CASE("probe excludes singleton manifolds") {
  std::vector<Manifold> ms;
  Rng rng(1);
  for (int mu = 0; mu < 3; ++mu) {
    Matrix x(mu == 0 ? 1 : 10, 4);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() + 4.0 * mu;
    ms.push_back({"m" + std::to_string(mu), x});
  }
  ProbeOptions opt;
  opt.n_splits = 3;
  const ProbeResult r = classifier_probe(ManifoldSet(ms), 1, opt);
  REQUIRE(r.excluded.size() == 1);
  CHECK(r.excluded[0] == "m0");
  CHECK(r.mean >= 0.9);
}
