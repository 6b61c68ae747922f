#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include "mfld/dims.hpp"
#include "mfld/empirical.hpp"
#include "mfld/error.hpp"
#include "mfld/mft.hpp"
#include "mfld/report.hpp"
#include "mfld/rng.hpp"

namespace mfld {

namespace {

// Sub-streams of the run seed. Every cell uses the same streams so that one
// layer is projected identically at every timestep.
enum Stream : std::uint64_t { kProjection = 1, kMft, kEmpirical, kProbe, kPermute };

struct Cell {
  std::string layer;
  TimestepSelector selector;
  std::string timestep;
};

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

void run_set(const ManifoldSet& mset, const AnalysisConfig& config, AnalysisRecord& rec) {
  std::vector<std::string> errors;
  rec.n_manifolds = mset.size();
  rec.mean_size = mset.mean_size();
  rec.analyzed_dim = mset.feature_dim();
  rec.alpha_lb = 2.0 / rec.mean_size;

  if (config.run.mft) {
    try {
      const MftReport r = analyze(mset, {config.n_t, derive_seed(config.seed, kMft), config.kappa,
                                         config.variance_threshold, CorrelationMode::Pearson});
      rec.alpha_mft = r.alpha;
      rec.alpha_over_lb = r.alpha_over_lb;
      rec.radius_mean = r.radius_mean;
      rec.dimension_mean = r.dimension_mean;
      rec.dimension_over_m = r.dimension_over_m;
      rec.inv_capacity_stderr = r.inv_capacity_stderr;
      rec.rho_center_pre = r.rho_center_pre;
      rec.rho_center_post = r.rho_center_post;
      rec.n_excluded = static_cast<double>(r.n_excluded);
      for (const auto& m : r.manifolds) {
        ManifoldRecord mr;
        mr.label = m.label;
        mr.size = m.size;
        mr.error = m.error;
        if (m.metrics) {
          mr.alpha = m.metrics->alpha;
          if (m.metrics->geometry_defined) {
            mr.radius = m.metrics->radius;
            mr.dimension = m.metrics->dimension;
          }
        }
        rec.manifolds.push_back(std::move(mr));
      }
    } catch (const std::exception& e) {
      errors.push_back(std::string("mft: ") + e.what());
    }
  }
  if (config.run.dims) {
    try {
      const SpectrumMetrics s = spectrum_metrics(mset.pooled(), config.variance_threshold);
      rec.d_pr = s.participation_ratio;
      rec.d_ev = static_cast<double>(s.explained_variance_dim);
    } catch (const std::exception& e) {
      errors.push_back(std::string("dims: ") + e.what());
    }
  }
  if (config.run.empirical) {
    try {
      const CapacityEstimate c =
          empirical_capacity(mset, config.n_dichotomies, derive_seed(config.seed, kEmpirical), config.frac_tol);
      rec.alpha_sim = c.alpha_sim;
      rec.alpha_sim_over_lb = c.alpha_sim * rec.mean_size / 2.0;
      rec.critical_n = static_cast<double>(c.critical_n);
      rec.fraction_at_critical = c.fraction_at_critical;
    } catch (const std::exception& e) {
      errors.push_back(std::string("empirical: ") + e.what());
    }
  }
  if (config.run.probe) {
    try {
      ProbeOptions opts;
      opts.n_splits = config.probe_splits;
      opts.l2 = config.probe_l2;
      const ProbeResult p = classifier_probe(mset, derive_seed(config.seed, kProbe), opts);
      rec.probe_accuracy = p.mean;
      rec.probe_stderr = p.stderr_mean;
      if (!p.excluded.empty()) {
        rec.notes += (rec.notes.empty() ? "" : "; ") + std::string("probe excluded ") + join(p.excluded, ",");
      }
    } catch (const std::exception& e) {
      errors.push_back(std::string("probe: ") + e.what());
    }
  }
  rec.error = join(errors, "; ");
}

std::vector<AnalysisRecord> analyze_cell(const ActivationStore& store, const AnalysisConfig& config,
                                         const Cell& cell) {
  AnalysisRecord base;
  base.layer = cell.layer;
  base.timestep = cell.timestep;
  base.manifold_type = config.manifold_key;
  base.seed = config.seed;

  std::vector<AnalysisRecord> out;
  try {
    std::vector<std::string> warnings;
    ManifoldSet mset = assemble_manifolds(store, config.manifold_key, cell.layer, cell.selector, &warnings);
    base.feature_dim = mset.feature_dim();
    base.notes = join(warnings, "; ");
    if (mset.feature_dim() > config.n_proj) {
      mset = random_project(mset, config.n_proj, derive_seed(config.seed, kProjection));
    }
    AnalysisRecord intact = base;
    run_set(mset, config, intact);
    out.push_back(std::move(intact));
    if (config.permute_control) {
      AnalysisRecord permuted = base;
      permuted.manifold_type += ":permuted";
      run_set(permute_labels(mset, derive_seed(config.seed, kPermute)), config, permuted);
      out.push_back(std::move(permuted));
    }
  } catch (const std::exception& e) {
    base.error = e.what();
    out.assign(1, base);
  }
  return out;
}

std::vector<Cell> plan_cells(const ActivationStore& store, const AnalysisConfig& config) {
  std::vector<std::string> layers = config.layers;
  if (layers.empty()) layers = store.manifest.layers;
  std::vector<Cell> cells;
  for (const auto& name : layers) {
    switch (config.timesteps) {
      case TimestepMode::FlattenAll:
        cells.push_back({name, TimestepSelector::flatten_all(), "all"});
        break;
      case TimestepMode::Center:
        cells.push_back({name, TimestepSelector::center(), "center"});
        break;
      case TimestepMode::PerTimestep: {
        // Unknown layers still get one cell so the failure is reported.
        std::uint64_t t_count = 1;
        for (const auto& l : store.layers) {
          if (l.name == name) t_count = std::max<std::uint64_t>(1, l.shape.timesteps);
        }
        for (std::uint64_t t = 0; t < t_count; ++t) {
          cells.push_back({name, TimestepSelector::at(t), std::to_string(t)});
        }
        break;
      }
    }
  }
  return cells;
}

}  // namespace

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MFLD_THREADS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<AnalysisRecord> run_analysis(const AnalysisConfig& config, const ActivationStore& store,
                                         std::size_t threads) {
  config.validate();
  const std::vector<Cell> cells = plan_cells(store, config);
  std::vector<std::vector<AnalysisRecord>> results(cells.size());

  const std::size_t workers = std::min(resolve_threads(threads), cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) results[i] = analyze_cell(store, config, cells[i]);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<AnalysisRecord> records;
  for (auto& r : results) std::move(r.begin(), r.end(), std::back_inserter(records));
  return records;
}

std::vector<AnalysisRecord> run_analysis(const AnalysisConfig& config, std::size_t threads) {
  config.validate();
  return run_analysis(config, read_store(config.input), threads);
}

int exit_code(const std::vector<AnalysisRecord>& records) {
  return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.failed(); }) ? 2 : 0;
}

}  // namespace mfld
