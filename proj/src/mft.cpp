#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mfld/error.hpp"
#include "mfld/mft.hpp"
#include "mfld/rng.hpp"

namespace mfld {

ManifoldMetrics manifold_geometry(const LocalManifold& local, std::size_t n_t, std::uint64_t seed,
                                  double kappa, std::vector<AnchorSolution>* trace) {
  require(n_t >= 1, ErrorCode::InvalidArgument, "n_t must be at least 1");
  const AnchorSolver solver(local.embedded(), kappa);
  const Index dim = local.dim();

  ManifoldMetrics out;
  out.embed_dim = dim;
  out.n_points = local.points();

  Rng rng(seed);
  const std::size_t max_rejections = 10 * n_t + 100;
  double sum = 0.0;
  double sum_sq = 0.0;
  double radius_sq = 0.0;
  double dimension = 0.0;
  std::size_t touching = 0;
  Vector sample(dim + 1);
  while (out.n_samples < n_t) {
    for (Index i = 0; i <= dim; ++i) sample(i) = rng.normal();
    AnchorSolution sol = solver.solve(sample);
    if (!sol.converged || !certify(solver.embedded(), sol, kappa).ok()) {
      ++out.n_rejected;
      require(out.n_rejected <= max_rejections, ErrorCode::Numerical,
              "anchor QP failed to certify on too many samples");
      continue;
    }
    const double c = sol.contribution(kappa);
    sum += c;
    sum_sq += c * c;
    ++out.n_samples;
    if (sol.interior) {
      ++out.n_interior;
    } else {
      const auto s = sol.anchor.head(dim);
      const double s_sq = s.squaredNorm();
      radius_sq += s_sq;
      if (s_sq > 0.0) {
        const double proj = sample.head(dim).dot(s);
        dimension += proj * proj / s_sq;
      }
      ++touching;
    }
    if (trace) trace->push_back(std::move(sol));
  }

  const auto n = static_cast<double>(out.n_samples);
  out.inv_capacity = sum / n;
  out.alpha = out.inv_capacity > 0 ? 1.0 / out.inv_capacity : std::numeric_limits<double>::infinity();
  if (out.n_samples > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    out.inv_capacity_stderr = std::sqrt(var / n);
  }
  if (touching > 0) {
    out.geometry_defined = true;
    out.radius = std::sqrt(radius_sq / static_cast<double>(touching));
    out.dimension = dimension / static_cast<double>(touching);
  }
  return out;
}

double aggregate_capacity(std::span<const ManifoldMetrics> metrics) {
  require(!metrics.empty(), ErrorCode::InvalidArgument, "no manifold metrics to aggregate");
  double inv = 0.0;
  for (const auto& m : metrics) inv += m.inv_capacity;
  inv /= static_cast<double>(metrics.size());
  return inv > 0 ? 1.0 / inv : std::numeric_limits<double>::infinity();
}

double ball_capacity(double radius, double dim) {
  require(radius >= 0.0 && dim > 0.0, ErrorCode::InvalidArgument, "ball capacity needs R >= 0, D > 0");
  const double a = radius * std::sqrt(dim);
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto integrand = [a, inv_sqrt_2pi](double t0) {
    const double gap = a - t0;
    return gap * gap * std::exp(-0.5 * t0 * t0) * inv_sqrt_2pi;
  };
  // The Gaussian weight is below 1e-300 outside [-40, 40].
  using Quad = boost::math::quadrature::gauss_kronrod<double, 15>;
  const double lo = -40.0;
  const double hi = std::min(a, 40.0);
  double err = 0.0;
  double integral = Quad::integrate(integrand, lo, std::min(0.0, hi), 20, 1e-14, &err);
  if (hi > 0.0) integral += Quad::integrate(integrand, 0.0, hi, 20, 1e-14, &err);
  return (radius * radius + 1.0) / integral;
}

MftReport analyze(const ManifoldSet& mset, const MftParams& params) {
  const PreprocessedSet pre = preprocess(mset, {params.variance_threshold, params.corr_mode});

  MftReport report;
  report.mean_size = mset.mean_size();
  report.alpha_lb = 2.0 / report.mean_size;
  report.rho_center_pre = pre.rho_center_pre;
  report.rho_center_post = pre.rho_center_post;
  report.center_subspace_dim = pre.basis.cols();

  report.manifolds.resize(mset.size());
  for (std::size_t mu = 0; mu < mset.size(); ++mu) {
    report.manifolds[mu].label = mset[mu].label;
    report.manifolds[mu].size = mset[mu].points.rows();
  }
  for (std::size_t mu : pre.degenerate) report.manifolds[mu].error = "DegenerateCenter";

  std::vector<ManifoldMetrics> kept;
  double dim_over_m = 0.0;
  double radius = 0.0;
  double dimension = 0.0;
  double var = 0.0;
  std::size_t geometric = 0;
  for (std::size_t i = 0; i < pre.retained.size(); ++i) {
    const std::size_t mu = pre.retained[i];
    try {
      const LocalManifold local = build_local_frame(pre.manifolds[i], pre.centers[i]);
      ManifoldMetrics m = manifold_geometry(local, params.n_t, derive_seed(params.seed, mu), params.kappa);
      report.n_rejected += m.n_rejected;
      var += m.inv_capacity_stderr * m.inv_capacity_stderr;
      if (m.geometry_defined) {
        radius += m.radius;
        dimension += m.dimension;
        dim_over_m += m.dimension / static_cast<double>(report.manifolds[mu].size);
        ++geometric;
      }
      kept.push_back(m);
      report.manifolds[mu].metrics = m;
    } catch (const Error& e) {
      report.manifolds[mu].error = e.what();
    }
  }
  report.n_excluded = mset.size() - kept.size();
  require(!kept.empty(), ErrorCode::Numerical, "no manifold produced capacity metrics");

  report.alpha = aggregate_capacity(kept);
  report.alpha_over_lb = report.alpha * report.mean_size / 2.0;
  report.inv_capacity_stderr = std::sqrt(var) / static_cast<double>(kept.size());
  if (geometric > 0) {
    report.radius_mean = radius / static_cast<double>(geometric);
    report.dimension_mean = dimension / static_cast<double>(geometric);
    report.dimension_over_m = dim_over_m / static_cast<double>(geometric);
  }
  return report;
}

}  // namespace mfld
