#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfld/error.hpp"
#include "mfld/report.hpp"

namespace mfld {

using nlohmann::json;

TimestepMode parse_timestep_mode(const std::string& s) {
  if (s == "flatten-all") return TimestepMode::FlattenAll;
  if (s == "per-timestep") return TimestepMode::PerTimestep;
  if (s == "center") return TimestepMode::Center;
  fail(ErrorCode::InvalidArgument, "unknown timestep mode '" + s + "'");
}

std::string to_string(TimestepMode mode) {
  switch (mode) {
    case TimestepMode::FlattenAll:
      return "flatten-all";
    case TimestepMode::PerTimestep:
      return "per-timestep";
    case TimestepMode::Center:
      return "center";
  }
  return "?";
}

ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  if (s == "table") return ReportFormat::Table;
  fail(ErrorCode::InvalidArgument, "unknown report format '" + s + "'");
}

RunFlags parse_run_flags(const std::string& csv) {
  RunFlags f{false, false, false, false};
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "mft") {
      f.mft = true;
    } else if (item == "empirical") {
      f.empirical = true;
    } else if (item == "dims") {
      f.dims = true;
    } else if (item == "probe") {
      f.probe = true;
    } else if (item == "all") {
      f = {true, true, true, true};
    } else if (!item.empty()) {
      fail(ErrorCode::InvalidArgument, "unknown analysis '" + item + "'");
    }
  }
  require(f.any(), ErrorCode::InvalidArgument, "at least one analysis must be selected");
  return f;
}

std::string to_string(const RunFlags& flags) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(flags.mft, "mft");
  add(flags.empirical, "empirical");
  add(flags.dims, "dims");
  add(flags.probe, "probe");
  return out;
}

void AnalysisConfig::validate() const {
  require(!manifold_key.empty(), ErrorCode::InvalidArgument, "manifold key is empty");
  require(n_proj > 0 && n_t > 0 && n_dichotomies > 0 && probe_splits > 0, ErrorCode::InvalidArgument,
          "counts must be positive");
  require(kappa >= 0.0, ErrorCode::InvalidArgument, "kappa must be nonnegative");
  require(variance_threshold > 0.0 && variance_threshold <= 1.0, ErrorCode::InvalidArgument,
          "variance threshold must lie in (0, 1]");
  require(frac_tol >= 0.0 && frac_tol < 0.5, ErrorCode::InvalidArgument, "frac_tol must lie in [0, 0.5)");
  require(probe_l2 >= 0.0, ErrorCode::InvalidArgument, "l2 must be nonnegative");
  require(run.any(), ErrorCode::InvalidArgument, "at least one analysis must be selected");
}

namespace {

json config_json(const AnalysisConfig& c) {
  return json{{"input", c.input},
              {"manifold_key", c.manifold_key},
              {"layers", c.layers},
              {"timesteps", to_string(c.timesteps)},
              {"n_proj", c.n_proj},
              {"n_t", c.n_t},
              {"n_dichotomies", c.n_dichotomies},
              {"kappa", c.kappa},
              {"variance_threshold", c.variance_threshold},
              {"frac_tol", c.frac_tol},
              {"seed", c.seed},
              {"run", to_string(c.run)},
              {"permute_control", c.permute_control},
              {"probe_splits", c.probe_splits},
              {"probe_l2", c.probe_l2}};
}

template <typename T>
T count_of(const json& v, const std::string& key) {
  require(v.is_number_unsigned(), ErrorCode::InvalidArgument, key + " must be a nonnegative integer");
  return v.get<T>();
}

AnalysisConfig config_of(const json& j) {
  require(j.is_object(), ErrorCode::InvalidArgument, "config must be a JSON object");
  AnalysisConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "input") {
        c.input = value.get<std::string>();
      } else if (key == "manifold_key") {
        c.manifold_key = value.get<std::string>();
      } else if (key == "layers") {
        if (value.is_string()) {
          const auto s = value.get<std::string>();
          c.layers.clear();
          if (s != "all") c.layers.push_back(s);
        } else {
          c.layers = value.get<std::vector<std::string>>();
        }
      } else if (key == "timesteps") {
        c.timesteps = parse_timestep_mode(value.get<std::string>());
      } else if (key == "n_proj") {
        c.n_proj = count_of<Index>(value, key);
      } else if (key == "n_t") {
        c.n_t = count_of<std::size_t>(value, key);
      } else if (key == "n_dichotomies") {
        c.n_dichotomies = count_of<std::size_t>(value, key);
      } else if (key == "kappa") {
        c.kappa = value.get<double>();
      } else if (key == "variance_threshold") {
        c.variance_threshold = value.get<double>();
      } else if (key == "frac_tol") {
        c.frac_tol = value.get<double>();
      } else if (key == "seed") {
        c.seed = count_of<std::uint64_t>(value, key);
      } else if (key == "run") {
        c.run = parse_run_flags(value.get<std::string>());
      } else if (key == "permute_control") {
        c.permute_control = value.get<bool>();
      } else if (key == "probe_splits") {
        c.probe_splits = count_of<std::size_t>(value, key);
      } else if (key == "probe_l2") {
        c.probe_l2 = value.get<double>();
      } else {
        fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
  return c;
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json number(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (!std::isfinite(*v)) return format_double(*v);
  return *v;
}

std::optional<double> number_of(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    if (s == "nan") return std::nan("");
    fail(ErrorCode::InvalidArgument, "bad number '" + s + "' in report");
  }
  return j.get<double>();
}

// The record's numeric columns, shared by CSV and JSON so both stay in step.
template <typename Rec, typename F>
void for_each_metric(Rec& r, F&& f) {
  f("alpha_mft", r.alpha_mft);
  f("alpha_lb", r.alpha_lb);
  f("alpha_over_lb", r.alpha_over_lb);
  f("radius_mean", r.radius_mean);
  f("dimension_mean", r.dimension_mean);
  f("dimension_over_m", r.dimension_over_m);
  f("inv_capacity_stderr", r.inv_capacity_stderr);
  f("rho_center_pre", r.rho_center_pre);
  f("rho_center_post", r.rho_center_post);
  f("n_excluded", r.n_excluded);
  f("d_pr", r.d_pr);
  f("d_ev", r.d_ev);
  f("alpha_sim", r.alpha_sim);
  f("alpha_sim_over_lb", r.alpha_sim_over_lb);
  f("critical_n", r.critical_n);
  f("fraction_at_critical", r.fraction_at_critical);
  f("probe_accuracy", r.probe_accuracy);
  f("probe_stderr", r.probe_stderr);
}

json record_json(const AnalysisRecord& r) {
  json j{{"layer", r.layer},
         {"timestep", r.timestep},
         {"manifold_type", r.manifold_type},
         {"n_manifolds", r.n_manifolds},
         {"mean_size", r.mean_size},
         {"feature_dim", r.feature_dim},
         {"analyzed_dim", r.analyzed_dim},
         {"seed", r.seed}};
  for_each_metric(r, [&](const char* name, const std::optional<double>& v) { j[name] = number(v); });
  json ms = json::array();
  for (const auto& m : r.manifolds) {
    ms.push_back({{"label", m.label},
                  {"size", m.size},
                  {"alpha", number(m.alpha)},
                  {"radius", number(m.radius)},
                  {"dimension", number(m.dimension)},
                  {"error", m.error}});
  }
  j["manifolds"] = std::move(ms);
  j["error"] = r.error;
  j["notes"] = r.notes;
  return j;
}

AnalysisRecord record_of(const json& j) {
  AnalysisRecord r;
  r.layer = j.at("layer").get<std::string>();
  r.timestep = j.at("timestep").get<std::string>();
  r.manifold_type = j.at("manifold_type").get<std::string>();
  r.n_manifolds = j.at("n_manifolds").get<std::size_t>();
  r.mean_size = j.at("mean_size").get<double>();
  r.feature_dim = j.at("feature_dim").get<Index>();
  r.analyzed_dim = j.at("analyzed_dim").get<Index>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for_each_metric(r, [&](const char* name, std::optional<double>& v) { v = number_of(j.at(name)); });
  for (const auto& m : j.at("manifolds")) {
    ManifoldRecord mr;
    mr.label = m.at("label").get<std::string>();
    mr.size = m.at("size").get<Index>();
    mr.alpha = number_of(m.at("alpha"));
    mr.radius = number_of(m.at("radius"));
    mr.dimension = number_of(m.at("dimension"));
    mr.error = m.at("error").get<std::string>();
    r.manifolds.push_back(std::move(mr));
  }
  r.error = j.at("error").get<std::string>();
  r.notes = j.at("notes").get<std::string>();
  return r;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_csv(const Report& report) {
  std::ostringstream os;
  os << "# mfld " << report.toolkit_version << " report schema " << report.schema_version << "\n";
  os << "# config " << config_json(report.config).dump() << "\n";
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : report.records) {
    std::vector<std::string> row{csv_field(r.layer),
                                 csv_field(r.timestep),
                                 csv_field(r.manifold_type),
                                 std::to_string(r.n_manifolds),
                                 format_double(r.mean_size),
                                 std::to_string(r.feature_dim),
                                 std::to_string(r.analyzed_dim),
                                 std::to_string(r.seed)};
    for_each_metric(r, [&](const char*, const std::optional<double>& v) {
      row.push_back(v ? format_double(*v) : std::string());
    });
    row.push_back(r.failed() ? "error" : "ok");
    row.push_back(csv_field(r.error));
    row.push_back(csv_field(r.notes));
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

std::string render_table(const Report& report) {
  std::ostringstream os;
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", *v);
    return std::string(buf);
  };
  char line[512];
  std::snprintf(line, sizeof line, "%-16s %-8s %-20s %9s %9s %8s %8s %8s %8s %6s %9s %8s  %s\n", "layer", "time",
                "type", "alpha", "a/a_LB", "R_M", "D_M", "rho", "D_PR", "D_EV", "alpha_sim", "probe", "status");
  os << line;
  for (const auto& r : report.records) {
    std::snprintf(line, sizeof line, "%-16s %-8s %-20s %9s %9s %8s %8s %8s %8s %6s %9s %8s  %s\n", r.layer.c_str(),
                  r.timestep.c_str(), r.manifold_type.c_str(), cell(r.alpha_mft).c_str(),
                  cell(r.alpha_over_lb).c_str(), cell(r.radius_mean).c_str(), cell(r.dimension_mean).c_str(),
                  cell(r.rho_center_pre).c_str(), cell(r.d_pr).c_str(), cell(r.d_ev).c_str(),
                  cell(r.alpha_sim).c_str(), cell(r.probe_accuracy).c_str(), r.failed() ? r.error.c_str() : "ok");
    os << line;
  }
  return os.str();
}

}  // namespace

std::string config_to_json(const AnalysisConfig& config) { return config_json(config).dump(); }

AnalysisConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  AnalysisConfig c = config_of(j);
  c.validate();
  return c;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"layer",     "timestep",     "manifold_type", "n_manifolds",
                               "mean_size", "feature_dim", "analyzed_dim",  "seed"};
    AnalysisRecord probe;
    for_each_metric(probe, [&](const char* name, const std::optional<double>&) { c.emplace_back(name); });
    c.insert(c.end(), {"status", "error", "notes"});
    return c;
  }();
  return cols;
}

std::string render_report(const Report& report, ReportFormat format) {
  require(!report.records.empty(), ErrorCode::NoRecords, "report has no records");
  if (format == ReportFormat::Csv) return render_csv(report);
  if (format == ReportFormat::Table) return render_table(report);
  json j{{"schema", "mfld-report"},
         {"schema_version", report.schema_version},
         {"toolkit_version", report.toolkit_version},
         {"config", config_json(report.config)}};
  json recs = json::array();
  for (const auto& r : report.records) recs.push_back(record_json(r));
  j["records"] = std::move(recs);
  return j.dump(2) + "\n";
}

void write_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = render_report(report, format);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

Report parse_report_json(const std::string& text) {
  Report report;
  try {
    const json j = json::parse(text);
    require(j.at("schema").get<std::string>() == "mfld-report", ErrorCode::InvalidArgument,
            "not an mfld report");
    report.schema_version = j.at("schema_version").get<int>();
    require(report.schema_version == kReportSchemaVersion, ErrorCode::InvalidArgument,
            "unsupported report schema version " + std::to_string(report.schema_version));
    report.toolkit_version = j.at("toolkit_version").get<std::string>();
    report.config = config_of(j.at("config"));
    for (const auto& r : j.at("records")) report.records.push_back(record_of(r));
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed report: ") + e.what());
  }
  return report;
}

Report read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report_json(ss.str());
}

}  // namespace mfld
