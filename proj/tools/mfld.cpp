#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfld/mfld.h"

namespace {

using nlohmann::json;

int report_failure(mfld_status st, const char* what) {
  std::fprintf(stderr, "mfld: %s failed (%s): %s\n", what, mfld_status_name(st), mfld_last_error());
  return 1;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_for(const std::string& format, const std::string& out) {
  if (!format.empty()) return format;
  if (out.size() > 5 && out.substr(out.size() - 5) == ".json") return "json";
  if (out.empty()) return "table";
  return "csv";
}

struct AnalyzeArgs {
  std::string config_file;
  std::string input;
  std::string manifold_key = "label";
  std::string layers = "all";
  std::string timesteps = "flatten-all";
  long long n_proj = 5000;
  long long n_t = 200;
  long long n_dichotomies = 101;
  double kappa = 0.0;
  double variance_threshold = 0.90;
  double frac_tol = 0.05;
  unsigned long long seed = 42;
  std::string run = "mft";
  bool permute_control = false;
  long long probe_splits = 10;
  double l2 = 0.0;
  unsigned threads = 0;
  std::string out;
  std::string format;
};

void add_analysis_options(CLI::App* cmd, AnalyzeArgs& a, bool with_run) {
  cmd->add_option("--config", a.config_file, "JSON analysis config; flags given on the command line override it");
  cmd->add_option("--input", a.input, "Activation store directory");
  cmd->add_option("--manifold-key", a.manifold_key, "Manifest label key that defines manifolds");
  cmd->add_option("--layers", a.layers, "Comma-separated layer names or 'all'");
  cmd->add_option("--timesteps", a.timesteps, "flatten-all | per-timestep | center")
      ->check(CLI::IsMember({"flatten-all", "per-timestep", "center"}));
  cmd->add_option("--n-proj", a.n_proj, "Random projection target dimension");
  cmd->add_option("--n-t", a.n_t, "Gaussian samples per manifold for the mean-field estimate");
  cmd->add_option("--n-dichotomies", a.n_dichotomies, "Random dichotomies per feature count");
  cmd->add_option("--kappa", a.kappa, "Margin");
  cmd->add_option("--variance-threshold", a.variance_threshold, "Variance fraction for D_EV and center removal");
  cmd->add_option("--frac-tol", a.frac_tol, "Stop bisection when |fraction - 1/2| is within this");
  cmd->add_option("--seed", a.seed, "Base seed");
  if (with_run) cmd->add_option("--run", a.run, "Analyses: mft,empirical,dims,probe or all");
  cmd->add_flag("--permute-control", a.permute_control, "Append a permuted-label control record per cell");
  cmd->add_option("--probe-splits", a.probe_splits, "Train/test splits for the classifier probe");
  cmd->add_option("--l2", a.l2, "L2 penalty of the classifier probe");
  cmd->add_option("--threads", a.threads, "Worker cap (default: MFLD_THREADS or hardware)");
  cmd->add_option("--out", a.out, "Report path (default: print to stdout)");
  cmd->add_option("--format", a.format, "csv | json | table")->check(CLI::IsMember({"csv", "json", "table"}));
}

std::string build_config(const CLI::App* cmd, const AnalyzeArgs& a, const char* forced_run) {
  json cfg = json::object();
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw std::runtime_error("cannot open config " + a.config_file);
    cfg = json::parse(in);
  }
  auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
  auto set = [&](const char* flag, const char* key, auto value) {
    if (given(flag) || !cfg.contains(key)) cfg[key] = value;
  };
  set("--input", "input", a.input);
  set("--manifold-key", "manifold_key", a.manifold_key);
  if (given("--layers") || !cfg.contains("layers")) {
    cfg["layers"] = a.layers == "all" ? std::vector<std::string>{} : split_list(a.layers);
  }
  set("--timesteps", "timesteps", a.timesteps);
  set("--n-proj", "n_proj", a.n_proj);
  set("--n-t", "n_t", a.n_t);
  set("--n-dichotomies", "n_dichotomies", a.n_dichotomies);
  set("--kappa", "kappa", a.kappa);
  set("--variance-threshold", "variance_threshold", a.variance_threshold);
  set("--frac-tol", "frac_tol", a.frac_tol);
  set("--seed", "seed", a.seed);
  if (forced_run) {
    cfg["run"] = forced_run;
  } else {
    set("--run", "run", a.run);
  }
  if (a.permute_control || !cfg.contains("permute_control")) cfg["permute_control"] = a.permute_control;
  set("--probe-splits", "probe_splits", a.probe_splits);
  set("--l2", "probe_l2", a.l2);
  return cfg.dump();
}

int emit(const mfld_report* report, const std::string& format, const std::string& out) {
  mfld_status st = MFLD_OK;
  if (out.empty()) {
    char* text = nullptr;
    st = mfld_report_render(report, format.c_str(), &text);
    if (st != MFLD_OK) return report_failure(st, "render");
    std::fputs(text, stdout);
    mfld_string_free(text);
  } else {
    st = mfld_report_write(report, format.c_str(), out.c_str());
    if (st != MFLD_OK) return report_failure(st, "write report");
  }
  return 0;
}

int run_analyze(const CLI::App* cmd, const AnalyzeArgs& a, const char* forced_run) {
  std::string config;
  try {
    config = build_config(cmd, a, forced_run);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mfld: bad configuration: %s\n", e.what());
    return 1;
  }
  mfld_report* report = nullptr;
  const mfld_status st = mfld_analyze(nullptr, config.c_str(), a.threads, &report);
  if (st != MFLD_OK) return report_failure(st, "analyze");
  const int rc = emit(report, format_for(a.format, a.out), a.out);
  size_t failed = 0;
  mfld_report_failed_count(report, &failed);
  if (failed > 0) std::fprintf(stderr, "mfld: %zu record(s) failed; see the error column\n", failed);
  const int code = rc != 0 ? rc : mfld_report_exit_code(report);
  mfld_report_free(report);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold capacity analysis of neural representations"};
  app.set_version_flag("--version", std::string(mfld_version()));
  app.require_subcommand(1);

  std::string csv, store_out, layer = "input", label_key = "label";
  auto* ingest = app.add_subcommand("ingest", "Convert a labeled CSV (label,f0,f1,...) into an activation store");
  ingest->add_option("--csv", csv, "Input CSV")->required();
  ingest->add_option("--out", store_out, "Store directory to write")->required();
  ingest->add_option("--layer", layer, "Layer name");
  ingest->add_option("--label-key", label_key, "Manifest label key");

  mfld_synth_spec spec;
  mfld_synth_spec_init(&spec);
  std::string family = "ball", synth_layer = "synth";
  bool f32 = false, solid = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic manifold family as an activation store");
  synth->add_option("--family", family, "ball | gaussian-cloud | correlated-centers")
      ->check(CLI::IsMember({"ball", "gaussian-cloud", "correlated-centers"}));
  synth->add_option("-P,--manifolds", spec.n_manifolds, "Number of manifolds");
  synth->add_option("-M,--points", spec.points, "Points per manifold");
  synth->add_option("-N,--features", spec.features, "Feature dimension");
  synth->add_option("-D,--dim", spec.dim, "Ball dimension");
  synth->add_option("-R,--radius", spec.radius, "Relative radius");
  synth->add_option("--center-corr", spec.center_corr, "Planted center correlation");
  synth->add_option("--seed", spec.seed, "Seed");
  synth->add_flag("--solid", solid, "Sample the solid ball instead of the sphere");
  synth->add_flag("--f32", f32, "Store single precision");
  synth->add_option("--layer", synth_layer, "Layer name");
  synth->add_option("--label-key", label_key, "Manifest label key");
  synth->add_option("--out", store_out, "Store directory to write")->required();

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "Run analyses over layers and timesteps of a store");
  add_analysis_options(analyze, analyze_args, true);

  AnalyzeArgs empirical_args;
  empirical_args.format = "";
  auto* empirical = app.add_subcommand("empirical", "Simulated capacity by bisection over random dichotomies");
  add_analysis_options(empirical, empirical_args, false);

  std::string report_in, report_out, report_format;
  auto* report = app.add_subcommand("report", "Re-render a JSON report");
  report->add_option("--in", report_in, "JSON report")->required();
  report->add_option("--out", report_out, "Output path (default: stdout)");
  report->add_option("--format", report_format, "csv | json | table")->check(CLI::IsMember({"csv", "json", "table"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (*ingest) {
    mfld_store* store = nullptr;
    mfld_status st = mfld_store_from_csv(csv.c_str(), layer.c_str(), label_key.c_str(), &store);
    if (st != MFLD_OK) return report_failure(st, "ingest");
    st = mfld_store_write(store, store_out.c_str());
    size_t n = 0;
    mfld_store_example_count(store, &n);
    mfld_store_free(store);
    if (st != MFLD_OK) return report_failure(st, "write store");
    std::printf("wrote %zu examples to %s\n", n, store_out.c_str());
    return 0;
  }
  if (*synth) {
    spec.family = family.c_str();
    spec.solid = solid ? 1 : 0;
    mfld_store* store = nullptr;
    mfld_status st = mfld_synth(&spec, synth_layer.c_str(), label_key.c_str(), f32 ? 1 : 0, &store);
    if (st != MFLD_OK) return report_failure(st, "synth");
    st = mfld_store_write(store, store_out.c_str());
    mfld_store_free(store);
    if (st != MFLD_OK) return report_failure(st, "write store");
    std::printf("wrote %s family (P=%zu, M=%lld, N=%lld) to %s\n", family.c_str(), spec.n_manifolds,
                static_cast<long long>(spec.points), static_cast<long long>(spec.features), store_out.c_str());
    return 0;
  }
  if (*analyze) return run_analyze(analyze, analyze_args, nullptr);
  if (*empirical) return run_analyze(empirical, empirical_args, "empirical");
  if (*report) {
    mfld_report* r = nullptr;
    const mfld_status st = mfld_report_read(report_in.c_str(), &r);
    if (st != MFLD_OK) return report_failure(st, "read report");
    const int rc = emit(r, format_for(report_format, report_out), report_out);
    mfld_report_free(r);
    return rc;
  }
  return 1;
}
