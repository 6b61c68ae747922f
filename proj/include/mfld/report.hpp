#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfld/tensor_io.hpp"

namespace mfld {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

enum class TimestepMode { FlattenAll, PerTimestep, Center };
enum class ReportFormat { Csv, Json, Table };

TimestepMode parse_timestep_mode(const std::string& s);
std::string to_string(TimestepMode mode);
ReportFormat parse_format(const std::string& s);

struct RunFlags {
  bool mft = true;
  bool empirical = false;
  bool dims = false;
  bool probe = false;

  bool any() const { return mft || empirical || dims || probe; }
  bool operator==(const RunFlags&) const = default;
};

// Parses "mft,dims,..." (also accepts "all").
RunFlags parse_run_flags(const std::string& csv);
std::string to_string(const RunFlags& flags);

struct AnalysisConfig {
  std::string input;
  std::string manifold_key = "label";
  std::vector<std::string> layers;  // empty means every layer in store order
  TimestepMode timesteps = TimestepMode::FlattenAll;
  Index n_proj = 5000;
  std::size_t n_t = 200;
  std::size_t n_dichotomies = 101;
  double kappa = 0.0;
  double variance_threshold = 0.90;
  double frac_tol = 0.05;
  std::uint64_t seed = 42;
  RunFlags run;
  bool permute_control = false;
  std::size_t probe_splits = 10;
  double probe_l2 = 0.0;

  void validate() const;
  bool operator==(const AnalysisConfig&) const = default;
};

std::string config_to_json(const AnalysisConfig& config);
AnalysisConfig config_from_json(const std::string& text);

struct ManifoldRecord {
  std::string label;
  Index size = 0;
  std::optional<double> alpha;
  std::optional<double> radius;
  std::optional<double> dimension;
  std::string error;

  bool operator==(const ManifoldRecord&) const = default;
};

struct AnalysisRecord {
  std::string layer;
  std::string timestep;       // "all", "center" or the frame index
  std::string manifold_type;  // manifold key, with ":permuted" for the control
  std::size_t n_manifolds = 0;
  double mean_size = 0;
  Index feature_dim = 0;
  Index analyzed_dim = 0;  // after projection
  std::uint64_t seed = 0;

  std::optional<double> alpha_mft;
  std::optional<double> alpha_lb;
  std::optional<double> alpha_over_lb;
  std::optional<double> radius_mean;
  std::optional<double> dimension_mean;
  std::optional<double> dimension_over_m;
  std::optional<double> inv_capacity_stderr;
  std::optional<double> rho_center_pre;
  std::optional<double> rho_center_post;
  std::optional<double> n_excluded;
  std::optional<double> d_pr;
  std::optional<double> d_ev;
  std::optional<double> alpha_sim;
  std::optional<double> alpha_sim_over_lb;
  std::optional<double> critical_n;
  std::optional<double> fraction_at_critical;
  std::optional<double> probe_accuracy;
  std::optional<double> probe_stderr;
  std::vector<ManifoldRecord> manifolds;
  std::string error;  // empty on success
  std::string notes;

  bool failed() const { return !error.empty(); }
  bool operator==(const AnalysisRecord&) const = default;
};

// Records for every (layer x timestep) cell in deterministic order: layer
// order, then timestep, then intact before permuted.
// `threads` = 0 picks MFLD_THREADS, then hardware concurrency. Output does not
// depend on the worker count.
std::vector<AnalysisRecord> run_analysis(const AnalysisConfig& config, std::size_t threads = 0);
std::vector<AnalysisRecord> run_analysis(const AnalysisConfig& config, const ActivationStore& store,
                                         std::size_t threads = 0);

std::size_t resolve_threads(std::size_t requested);

struct Report {
  std::string toolkit_version = kToolkitVersion;
  int schema_version = kReportSchemaVersion;
  AnalysisConfig config;
  std::vector<AnalysisRecord> records;

  bool operator==(const Report&) const = default;
};

std::string render_report(const Report& report, ReportFormat format);
void write_report(const Report& report, ReportFormat format, const std::filesystem::path& path);
Report parse_report_json(const std::string& text);
Report read_report(const std::filesystem::path& path);

// CSV columns, in output order.
const std::vector<std::string>& csv_columns();

// 0 when every record succeeded, 2 when some failed.
int exit_code(const std::vector<AnalysisRecord>& records);

}  // namespace mfld
