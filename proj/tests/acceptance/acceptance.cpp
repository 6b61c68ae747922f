// Acceptance suite: one pass/fail line per criterion.
//   mfld_acceptance                 run every criterion
//   mfld_acceptance --criterion 4   run one

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfld/dims.hpp"
#include "mfld/empirical.hpp"
#include "mfld/mfld.h"
#include "mfld/mft.hpp"
#include "mfld/report.hpp"
#include "mfld/rng.hpp"
#include "mfld/synth.hpp"
#include "oracles.hpp"

using namespace mfld;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

SynthSpec ball_spec(std::size_t p, Index m, Index n, Index d, double r, std::uint64_t seed) {
  SynthSpec s;
  s.family = SynthFamily::Ball;
  s.P = p;
  s.M = m;
  s.N = n;
  s.D = d;
  s.R = r;
  s.seed = seed;
  return s;
}

SynthSpec cloud_spec(std::size_t p, Index m, Index n, double r, std::uint64_t seed, double corr = -1) {
  SynthSpec s;
  s.family = corr >= 0 ? SynthFamily::CorrelatedCenters : SynthFamily::GaussianCloud;
  s.P = p;
  s.M = m;
  s.N = n;
  s.R = r;
  s.center_corr = std::max(corr, 0.0);
  s.seed = seed;
  return s;
}

Matrix gaussian(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

ManifoldSet transform(const ManifoldSet& m, const Matrix& q, double scale) {
  std::vector<Manifold> out;
  for (const auto& x : m.manifolds()) out.push_back({x.label, scale * x.points * q});
  return ManifoldSet(out);
}

// 1. Single points: simulated capacity 2, ball formula at R = 0.
Outcome point_capacity() {
  Outcome o;
  const Matrix x = gaussian(100, 200, 1);
  std::vector<Manifold> ms;
  for (Index i = 0; i < 100; ++i) ms.push_back({"p" + std::to_string(i), x.row(i)});
  const CapacityEstimate est = empirical_capacity(ManifoldSet(ms), 101, 7);
  o.check(std::abs(est.alpha_sim - 2.0) <= 0.2, fmt("alpha_sim=%.4f not within 2 +- 10%%", est.alpha_sim));
  o.note(fmt("alpha_sim=%.4f (N_c=%lld, f=%.3f)", est.alpha_sim, static_cast<long long>(est.critical_n),
             est.fraction_at_critical));
  for (double d : {1.0, 10.0, 100.0}) {
    const double a = ball_capacity(0.0, d);
    o.check(std::abs(a - 2.0) <= 1e-6, fmt("ball_capacity(0,%g)=%.9f", d, a));
  }
  o.note("ball_capacity(0, D) = 2 for D in {1,10,100}");
  return o;
}

// 2. Mean-field capacity against simulated capacity on six ball families.
Outcome theory_vs_simulation() {
  Outcome o;
  double sxy = 0, sxx = 0;
  std::uint64_t seed = 100;
  for (Index d : {5, 10, 20}) {
    for (double r : {0.5, 1.0}) {
      const ManifoldSet m = make_ball_manifolds(ball_spec(30, 200, 3000, d, r, ++seed));
      const MftReport mft = analyze(m, {200, derive_seed(seed, 1)});
      const CapacityEstimate sim = empirical_capacity(m, 101, derive_seed(seed, 2));
      const double ratio = mft.alpha / sim.alpha_sim;
      o.check(std::abs(ratio - 1.0) <= 0.15, fmt("D=%lld R=%.1f ratio %.3f", static_cast<long long>(d), r, ratio));
      o.note(fmt("D=%lld R=%.1f mft=%.4f sim=%.4f", static_cast<long long>(d), r, mft.alpha, sim.alpha_sim));
      sxy += mft.alpha * sim.alpha_sim;
      sxx += mft.alpha * mft.alpha;
    }
  }
  const double slope = sxy / sxx;
  o.check(std::abs(slope - 1.0) <= 0.1, fmt("slope %.3f", slope));
  o.note(fmt("slope=%.4f", slope));
  return o;
}

// 3. Densely sampled balls against the closed form and the planted geometry.
Outcome ball_oracle() {
  Outcome o;
  std::uint64_t seed = 300;
  for (Index d : {5, 10}) {
    for (double r : {0.5, 1.0}) {
      const ManifoldSet m = make_ball_manifolds(ball_spec(16, d >= 10 ? 15000 : 4000, 120, d, r, ++seed));
      const MftReport rep = analyze(m, {400, derive_seed(seed, 1)});
      const double oracle_alpha = ball_capacity(r, static_cast<double>(d));
      const auto tag = fmt("D=%lld R=%.1f", static_cast<long long>(d), r);
      o.check(rel(rep.alpha, oracle_alpha) <= 0.15, tag + fmt(" alpha %.4f vs %.4f", rep.alpha, oracle_alpha));
      o.check(rel(rep.radius_mean, r) <= 0.10, tag + fmt(" R_M %.4f", rep.radius_mean));
      if (d >= 10) o.check(rel(rep.dimension_mean, double(d)) <= 0.20, tag + fmt(" D_M %.3f", rep.dimension_mean));
      o.note(tag + fmt(" alpha=%.4f/%.4f R_M=%.3f D_M=%.2f", rep.alpha, oracle_alpha, rep.radius_mean,
                       rep.dimension_mean));
    }
  }
  return o;
}

// 4. Permuted labels sit at the lower bound; intact clouds well above it.
Outcome permutation_control() {
  Outcome o;
  const ManifoldSet m = make_gaussian_clouds(cloud_spec(50, 20, 500, 1.0, 4));
  const MftReport intact = analyze(m, {200, 11});
  const MftReport permuted = analyze(permute_labels(m, 12), {200, 11});
  o.check(std::abs(intact.alpha_lb - 0.1) <= 1e-12, fmt("alpha_LB %.4f", intact.alpha_lb));
  o.check(permuted.alpha_over_lb >= 0.8 && permuted.alpha_over_lb <= 1.3,
          fmt("permuted alpha/alpha_LB %.3f", permuted.alpha_over_lb));
  o.check(intact.alpha_over_lb >= 1.5, fmt("intact alpha/alpha_LB %.3f", intact.alpha_over_lb));
  o.note(fmt("intact %.3f, permuted %.3f (alpha_LB=%.2f)", intact.alpha_over_lb, permuted.alpha_over_lb,
             intact.alpha_lb));
  return o;
}

// 5. The reported critical point reproduces, and the sampled curve is monotone.
Outcome bisection_contract() {
  Outcome o;
  std::vector<std::pair<std::string, ManifoldSet>> sets;
  sets.emplace_back("balls", make_ball_manifolds(ball_spec(20, 30, 400, 5, 1.0, 51)));
  sets.emplace_back("clouds", make_gaussian_clouds(cloud_spec(40, 10, 300, 1.0, 52)));
  const Matrix x = gaussian(60, 150, 53);
  std::vector<Manifold> pts;
  for (Index i = 0; i < 60; ++i) pts.push_back({"p" + std::to_string(i), x.row(i)});
  sets.emplace_back("points", ManifoldSet(pts));
  for (const auto& [name, m] : sets) {
    const CapacityEstimate est = empirical_capacity(m, 101, 5);
    const double again = fraction_separable(m, est.critical_n, 101, 5);
    o.check(again >= 0.40 && again <= 0.60, name + fmt(" fraction %.3f at N_c", again));
    std::vector<CurvePoint> curve = est.curve;
    std::sort(curve.begin(), curve.end(), [](auto& a, auto& b) { return a.n_features < b.n_features; });
    double running = 0;
    double worst = 0;
    for (const auto& c : curve) {
      worst = std::max(worst, running - c.fraction);
      running = std::max(running, c.fraction);
    }
    o.check(worst <= 0.07, name + fmt(" curve drops by %.3f", worst));
    o.note(name + fmt(" N_c=%lld f=%.3f drop=%.3f (%zu points)", static_cast<long long>(est.critical_n), again,
                      worst, curve.size()));
  }
  return o;
}

struct Metrics {
  double alpha, radius, dimension, alpha_sim, d_pr, d_ev;
};

Metrics all_metrics(const ManifoldSet& m) {
  const MftReport r = analyze(m, {200, 9});
  const CapacityEstimate e = empirical_capacity(m, 101, 10);
  const SpectrumMetrics s = spectrum_metrics(m.pooled());
  return {r.alpha, r.radius_mean, r.dimension_mean, e.alpha_sim, s.participation_ratio,
          static_cast<double>(s.explained_variance_dim)};
}

// 6. Scaling and rotation invariance.
Outcome invariance() {
  Outcome o;
  const std::vector<std::pair<std::string, ManifoldSet>> sets{
      {"balls", make_ball_manifolds(ball_spec(10, 30, 200, 5, 1.0, 61))},
      {"clouds", make_gaussian_clouds(cloud_spec(10, 30, 200, 1.0, 62))},
      {"correlated", make_gaussian_clouds(cloud_spec(10, 30, 200, 1.0, 63, 0.5))}};
  const Matrix q = oracle::random_orthogonal(200, 64);
  const char* names[] = {"alpha_MFT", "R_M", "D_M", "alpha_SIM", "D_PR", "D_EV"};
  const bool discrete[] = {false, false, false, true, false, true};
  double worst_scale = 0, worst_rot = 0;
  for (const auto& [name, m] : sets) {
    const Metrics base = all_metrics(m);
    const Metrics scaled = all_metrics(transform(m, Matrix::Identity(200, 200), 7.5));
    const Metrics rotated = all_metrics(transform(m, q, 1.0));
    const double* b = &base.alpha;
    const double* s = &scaled.alpha;
    const double* r = &rotated.alpha;
    for (int k = 0; k < 6; ++k) {
      const double ds = rel(s[k], b[k]);
      const double dr = rel(r[k], b[k]);
      worst_scale = std::max(worst_scale, ds);
      worst_rot = std::max(worst_rot, dr);
      if (discrete[k]) {
        o.check(s[k] == b[k], name + " scaled " + names[k]);
      } else {
        o.check(ds <= 1e-6, name + " scaled " + names[k] + fmt(" rel %.2e", ds));
      }
      o.check(dr <= 0.01, name + " rotated " + names[k] + fmt(" rel %.2e", dr));
    }
  }
  o.note(fmt("worst relative change: scaling %.2e, rotation %.2e", worst_scale, worst_rot));
  return o;
}

// 7. Every converged anchor solve certifies.
Outcome kkt_certification() {
  Outcome o;
  std::vector<Matrix> frames;
  std::uint64_t seed = 700;
  for (Index d : {1, 3, 8, 15}) {
    const ManifoldSet m = make_ball_manifolds(ball_spec(3, 40, 60, d, 0.5 + 0.1 * double(d), ++seed));
    const PreprocessedSet pre = preprocess(m);
    for (std::size_t i = 0; i < pre.manifolds.size(); ++i) {
      frames.push_back(build_local_frame(pre.manifolds[i], pre.centers[i]).embedded());
    }
  }
  for (double r : {0.3, 1.0, 3.0}) {
    const ManifoldSet m = make_gaussian_clouds(cloud_spec(3, 25, 80, r, ++seed));
    const PreprocessedSet pre = preprocess(m);
    for (std::size_t i = 0; i < pre.manifolds.size(); ++i) {
      frames.push_back(build_local_frame(pre.manifolds[i], pre.centers[i]).embedded());
    }
  }
  std::size_t total = 0, accepted = 0, certified = 0, active = 0;
  KktResiduals worst;
  for (double kappa : {0.0, 0.25}) {
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const AnchorSolver solver(frames[f], kappa);
      Rng rng(derive_seed(seed, f * 2 + (kappa > 0)));
      for (int k = 0; k < 300; ++k) {
        Vector t(frames[f].cols());
        for (Index i = 0; i < t.size(); ++i) t(i) = rng.normal();
        const AnchorSolution sol = solver.solve(t);
        ++total;
        if (!sol.converged) continue;
        ++accepted;
        if (!sol.interior) ++active;
        const KktResiduals res = certify(frames[f], sol, kappa);
        if (res.ok()) ++certified;
        worst.feasibility = std::max(worst.feasibility, res.feasibility);
        worst.stationarity = std::max(worst.stationarity, res.stationarity);
        worst.slackness = std::max(worst.slackness, res.slackness);
      }
    }
  }
  o.check(total >= 10000, fmt("only %zu solves", total));
  o.check(certified == accepted, fmt("%zu of %zu accepted solutions certify", certified, accepted));
  o.note(fmt("%zu solves, %zu accepted, %zu with active constraints, %zu certified; worst feas %.1e stat %.1e "
             "slack %.1e",
             total, accepted, active, certified, worst.feasibility, worst.stationarity, worst.slackness));
  return o;
}

// 8. Separability decisions against exhaustive enumeration.
Outcome separability_exactness() {
  Outcome o;
  Rng rng(800);
  std::size_t agree = 0, separable = 0, n_inst = 0;
  while (n_inst < 1000) {
    const Index n = 2 + static_cast<Index>(rng.below(11));
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const bool grid = rng.below(4) == 0;
    Matrix x(n, d);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = grid ? double(rng.below(3)) - 1.0 : rng.normal();
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& s : y) s = rng.below(2) ? 1 : -1;
    const bool got = is_separable(x, y);
    const bool want = oracle::separable_by_enumeration(oracle::signed_augmented(x, y));
    ++n_inst;
    if (got == want) ++agree;
    if (want) ++separable;
  }
  o.check(agree == n_inst, fmt("%zu of %zu agree", agree, n_inst));
  o.note(fmt("%zu/%zu agree (%zu separable)", agree, n_inst, separable));
  return o;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// 9. Dimension formulas.
Outcome dimension_formulas() {
  Outcome o;
  o.check(participation_ratio(vec({1, 1, 1, 1})) == 4.0, "D_PR{1,1,1,1}");
  o.check(std::abs(participation_ratio(vec({3, 1})) - 1.6) <= 1e-12, "D_PR{3,1}");
  o.check(explained_variance_dim(vec({0.8, 0.15, 0.05}), 0.9) == 2, "D_EV{.8,.15,.05}");
  double worst = 0;
  bool ev_same = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Matrix x = gaussian(80, 30, 900 + s);
    for (Index j = 0; j < 30; ++j) x.col(j) *= 1.0 + 0.2 * double(j);
    const Matrix q = oracle::random_orthogonal(30, static_cast<unsigned>(910 + s));
    const SpectrumMetrics a = spectrum_metrics(x);
    const SpectrumMetrics b = spectrum_metrics(x * q);
    worst = std::max(worst, rel(b.participation_ratio, a.participation_ratio));
    ev_same = ev_same && a.explained_variance_dim == b.explained_variance_dim;
  }
  o.check(worst <= 1e-9, fmt("D_PR rotation drift %.2e", worst));
  o.check(ev_same, "D_EV changed under rotation");
  o.note(fmt("D_PR{3,1}=%.15f, rotation drift %.1e", participation_ratio(vec({3, 1})), worst));
  return o;
}

// 10. Probe accuracy follows capacity across an untangling sweep.
Outcome probe_concordance() {
  Outcome o;
  const std::vector<double> radii{4.0, 2.5, 1.6, 1.0, 0.6};
  std::vector<double> acc, alpha;
  ProbeOptions popt;
  popt.n_splits = 10;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const ManifoldSet m = make_gaussian_clouds(cloud_spec(10, 40, 50, radii[i], 1000));
    acc.push_back(classifier_probe(m, 1001, popt).mean);
    alpha.push_back(analyze(m, {200, 1002}).alpha);
    o.note(fmt("R=%.1f acc=%.3f alpha=%.4f", radii[i], acc.back(), alpha.back()));
  }
  const double rho = oracle::spearman(acc, alpha);
  o.check(rho >= 0.8, fmt("spearman %.3f", rho));
  o.note(fmt("spearman=%.3f", rho));

  const ManifoldSet m = make_gaussian_clouds(cloud_spec(10, 40, 50, radii[3], 1000));
  const ProbeResult perm = classifier_probe(permute_labels(m, 1003), 1004, popt);
  const double chance = 0.1;
  o.check(std::abs(perm.mean - chance) <= 3.0 * perm.stderr_mean,
          fmt("permuted accuracy %.3f +- %.3f vs chance %.2f", perm.mean, perm.stderr_mean, chance));
  o.note(fmt("permuted acc=%.3f +- %.3f", perm.mean, perm.stderr_mean));
  return o;
}

// Store with t frames; the center frame carries class structure, the rest is noise.
ActivationStore temporal_store(std::uint64_t t, int p, int m, std::uint64_t f, double noise, std::uint64_t seed) {
  ActivationStore s;
  Rng rng(seed);
  const std::uint64_t n = static_cast<std::uint64_t>(p * m);
  const Matrix centers = gaussian(p, static_cast<Index>(f), seed + 1) / std::sqrt(double(f));
  Layer l;
  l.name = "rnn";
  l.shape = {n, t, f};
  std::vector<double> data(l.shape.count());
  for (std::uint64_t e = 0; e < n; ++e) {
    const Index mu = static_cast<Index>(e / static_cast<std::uint64_t>(m));
    for (std::uint64_t k = 0; k < t; ++k) {
      for (std::uint64_t j = 0; j < f; ++j) {
        double v = rng.normal() / std::sqrt(double(f));
        if (k == t / 2) v = centers(mu, static_cast<Index>(j)) + noise * v;
        data[(e * t + k) * f + j] = v;
      }
    }
  }
  l.data = std::move(data);
  s.layers.push_back(std::move(l));
  s.manifest.layers.push_back("rnn");
  for (std::uint64_t e = 0; e < n; ++e) {
    ExampleEntry entry;
    entry.id = "utt" + std::to_string(e);
    entry.labels["word"] = "w" + std::to_string(e / static_cast<std::uint64_t>(m));
    entry.center_frame = static_cast<std::int64_t>(t / 2);
    s.manifest.examples.push_back(entry);
  }
  return s;
}

// 11. Capacity over time peaks where the signal is.
Outcome temporal_sweep() {
  Outcome o;
  const ActivationStore store = temporal_store(7, 40, 20, 400, 0.5, 1100);
  AnalysisConfig c;
  c.manifold_key = "word";
  c.timesteps = TimestepMode::PerTimestep;
  c.n_t = 200;
  const auto records = run_analysis(c, store);
  std::vector<double> ratio;
  for (const auto& r : records) {
    if (r.failed()) {
      o.check(false, "record failed: " + r.error);
      return o;
    }
    ratio.push_back(*r.alpha_over_lb);
  }
  const auto peak = std::max_element(ratio.begin(), ratio.end()) - ratio.begin();
  o.check(peak == 3, fmt("peak at frame %td", peak));
  std::string series;
  for (std::size_t k = 0; k < ratio.size(); ++k) {
    series += fmt("%s%.3f", k ? " " : "", ratio[k]);
    if (k != 3) o.check(std::abs(ratio[k] - 1.0) <= 0.2, fmt("frame %zu alpha/alpha_LB %.3f", k, ratio[k]));
  }
  o.note("alpha/alpha_LB by frame: " + series);
  return o;
}

// 12. Byte-identical reports across worker counts, through the C interface.
Outcome determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mfld_acceptance_determinism";
  fs::remove_all(dir);
  ActivationStore store = temporal_store(3, 6, 12, 30, 0.8, 1200);
  {
    // A second layer with different width.
    const ActivationStore other = temporal_store(3, 6, 12, 20, 0.4, 1201);
    Layer l = other.layers[0];
    l.name = "fc";
    store.layers.push_back(l);
    store.manifest.layers.push_back("fc");
  }
  write_store(store, dir / "store");

  mfld_store* handle = nullptr;
  if (mfld_store_read((dir / "store").string().c_str(), &handle) != MFLD_OK) {
    o.check(false, std::string("store read: ") + mfld_last_error());
    return o;
  }
  const std::string config =
      R"({"manifold_key": "word", "timesteps": "per-timestep", "n_t": 60, "n_dichotomies": 21, "n_proj": 25,)"
      R"( "run": "all", "permute_control": true, "probe_splits": 3, "seed": 77})";
  std::map<std::size_t, std::pair<std::string, std::string>> out;
  std::size_t records = 0;
  for (std::size_t threads : {1, 2, 8}) {
    mfld_report* rep = nullptr;
    if (mfld_analyze(handle, config.c_str(), threads, &rep) != MFLD_OK) {
      o.check(false, std::string("analyze: ") + mfld_last_error());
      break;
    }
    mfld_report_record_count(rep, &records);
    char* csv = nullptr;
    char* json = nullptr;
    mfld_report_render(rep, "csv", &csv);
    mfld_report_render(rep, "json", &json);
    out[threads] = {csv, json};
    mfld_string_free(csv);
    mfld_string_free(json);
    mfld_report_free(rep);
  }
  mfld_store_free(handle);
  fs::remove_all(dir);
  if (!o.pass) return o;
  for (std::size_t threads : {2, 8}) {
    o.check(out[threads].first == out[1].first, fmt("CSV differs with %zu workers", threads));
    o.check(out[threads].second == out[1].second, fmt("JSON differs with %zu workers", threads));
  }
  o.note(fmt("%zu records, %zu CSV bytes, %zu JSON bytes identical for 1/2/8 workers", records,
             out[1].first.size(), out[1].second.size()));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfld acceptance suite"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "point capacity", 120, point_capacity},
      {2, "theory-simulation match", 1200, theory_vs_simulation},
      {3, "ball oracle", 600, ball_oracle},
      {4, "permutation control", 600, permutation_control},
      {5, "bisection contract", 0, bisection_contract},
      {6, "invariance", 0, invariance},
      {7, "KKT certification", 0, kkt_certification},
      {8, "separability exactness", 0, separability_exactness},
      {9, "dimension formulas", 0, dimension_formulas},
      {10, "probe concordance", 0, probe_concordance},
      {11, "temporal sweep", 0, temporal_sweep},
      {12, "determinism", 0, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0) o.check(secs <= c.budget_s, fmt("runtime %.0fs over %.0fs budget", secs, c.budget_s));
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
