#include <cstring>
#include <new>
#include <string>

#include "mfld/dims.hpp"
#include "mfld/error.hpp"
#include "mfld/mfld.h"
#include "mfld/mft.hpp"
#include "mfld/report.hpp"
#include "mfld/synth.hpp"

struct mfld_store {
  mfld::ActivationStore store;
};

struct mfld_report {
  mfld::Report report;
};

namespace {

thread_local std::string g_last_error;

mfld_status to_status(mfld::ErrorCode code) {
  switch (code) {
    case mfld::ErrorCode::Io:
      return MFLD_ERR_IO;
    case mfld::ErrorCode::BadMagic:
      return MFLD_ERR_BAD_MAGIC;
    case mfld::ErrorCode::Truncated:
      return MFLD_ERR_TRUNCATED;
    case mfld::ErrorCode::ManifestMismatch:
      return MFLD_ERR_MANIFEST_MISMATCH;
    case mfld::ErrorCode::InvalidStore:
      return MFLD_ERR_INVALID_STORE;
    case mfld::ErrorCode::UnknownKey:
      return MFLD_ERR_UNKNOWN_KEY;
    case mfld::ErrorCode::UnknownLayer:
      return MFLD_ERR_UNKNOWN_LAYER;
    case mfld::ErrorCode::TooFewManifolds:
      return MFLD_ERR_TOO_FEW_MANIFOLDS;
    case mfld::ErrorCode::InvalidArgument:
      return MFLD_ERR_INVALID_ARGUMENT;
    case mfld::ErrorCode::NotBracketable:
      return MFLD_ERR_NOT_BRACKETABLE;
    case mfld::ErrorCode::NoRecords:
      return MFLD_ERR_NO_RECORDS;
    case mfld::ErrorCode::Numerical:
      return MFLD_ERR_NUMERICAL;
  }
  return MFLD_ERR_INTERNAL;
}

template <typename F>
mfld_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return MFLD_OK;
  } catch (const mfld::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MFLD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MFLD_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  mfld::require(p != nullptr, mfld::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* mfld_version(void) { return mfld::kToolkitVersion; }

const char* mfld_status_name(mfld_status status) {
  switch (status) {
    case MFLD_OK:
      return "Ok";
    case MFLD_ERR_INTERNAL:
      return "Internal";
    default:
      if (status >= MFLD_ERR_IO && status <= MFLD_ERR_NUMERICAL) {
        return mfld::to_string(static_cast<mfld::ErrorCode>(status)).data();
      }
      return "Unknown";
  }
}

const char* mfld_last_error(void) { return g_last_error.c_str(); }

void mfld_string_free(char* s) { delete[] s; }

mfld_status mfld_store_read(const char* dir, mfld_store** out) {
  return guard([&] {
    need(dir, "dir");
    need(out, "out");
    *out = new mfld_store{mfld::read_store(dir)};
  });
}

mfld_status mfld_store_write(const mfld_store* store, const char* dir) {
  return guard([&] {
    need(store, "store");
    need(dir, "dir");
    mfld::write_store(store->store, dir);
  });
}

mfld_status mfld_store_from_csv(const char* csv_path, const char* layer, const char* label_key, mfld_store** out) {
  return guard([&] {
    need(csv_path, "csv_path");
    need(out, "out");
    *out = new mfld_store{mfld::import_csv(csv_path, layer ? layer : "input", label_key ? label_key : "label")};
  });
}

void mfld_store_free(mfld_store* store) { delete store; }

mfld_status mfld_store_layer_count(const mfld_store* store, size_t* out) {
  return guard([&] {
    need(store, "store");
    need(out, "out");
    *out = store->store.layers.size();
  });
}

mfld_status mfld_store_layer_name(const mfld_store* store, size_t index, const char** out) {
  return guard([&] {
    need(store, "store");
    need(out, "out");
    mfld::require(index < store->store.layers.size(), mfld::ErrorCode::InvalidArgument, "layer index out of range");
    *out = store->store.layers[index].name.c_str();
  });
}

mfld_status mfld_store_layer_shape(const mfld_store* store, size_t index, uint64_t* examples, uint64_t* timesteps,
                                   uint64_t* features) {
  return guard([&] {
    need(store, "store");
    mfld::require(index < store->store.layers.size(), mfld::ErrorCode::InvalidArgument, "layer index out of range");
    const auto& shape = store->store.layers[index].shape;
    if (examples) *examples = shape.examples;
    if (timesteps) *timesteps = shape.timesteps;
    if (features) *features = shape.features;
  });
}

mfld_status mfld_store_example_count(const mfld_store* store, size_t* out) {
  return guard([&] {
    need(store, "store");
    need(out, "out");
    *out = store->store.manifest.examples.size();
  });
}

void mfld_synth_spec_init(mfld_synth_spec* spec) {
  if (!spec) return;
  const mfld::SynthSpec d;
  spec->family = "ball";
  spec->n_manifolds = d.P;
  spec->points = d.M;
  spec->features = d.N;
  spec->dim = d.D;
  spec->radius = d.R;
  spec->center_corr = d.center_corr;
  spec->seed = d.seed;
  spec->solid = 0;
}

mfld_status mfld_synth(const mfld_synth_spec* spec, const char* layer, const char* label_key, int single_precision,
                       mfld_store** out) {
  return guard([&] {
    need(spec, "spec");
    need(spec->family, "spec->family");
    need(out, "out");
    mfld::SynthSpec s;
    s.family = mfld::parse_family(spec->family);
    s.P = spec->n_manifolds;
    s.M = spec->points;
    s.N = spec->features;
    s.D = spec->dim;
    s.R = spec->radius;
    s.center_corr = spec->center_corr;
    s.seed = spec->seed;
    s.solid = spec->solid != 0;
    const auto mset = mfld::make_synthetic(s);
    *out = new mfld_store{mfld::to_store(mset, layer ? layer : "synth", label_key ? label_key : "label",
                                         single_precision ? mfld::DType::F32 : mfld::DType::F64)};
  });
}

mfld_status mfld_analyze(const mfld_store* store, const char* config_json, size_t threads, mfld_report** out) {
  return guard([&] {
    need(config_json, "config_json");
    need(out, "out");
    mfld::Report r;
    r.config = mfld::config_from_json(config_json);
    r.records = store ? mfld::run_analysis(r.config, store->store, threads) : mfld::run_analysis(r.config, threads);
    mfld::require(!r.records.empty(), mfld::ErrorCode::NoRecords, "analysis produced no records");
    *out = new mfld_report{std::move(r)};
  });
}

mfld_status mfld_report_record_count(const mfld_report* report, size_t* out) {
  return guard([&] {
    need(report, "report");
    need(out, "out");
    *out = report->report.records.size();
  });
}

mfld_status mfld_report_failed_count(const mfld_report* report, size_t* out) {
  return guard([&] {
    need(report, "report");
    need(out, "out");
    size_t n = 0;
    for (const auto& r : report->report.records) n += r.failed() ? 1 : 0;
    *out = n;
  });
}

int mfld_report_exit_code(const mfld_report* report) {
  return report ? mfld::exit_code(report->report.records) : 1;
}

mfld_status mfld_report_render(const mfld_report* report, const char* format, char** out) {
  return guard([&] {
    need(report, "report");
    need(format, "format");
    need(out, "out");
    *out = dup_string(mfld::render_report(report->report, mfld::parse_format(format)));
  });
}

mfld_status mfld_report_write(const mfld_report* report, const char* format, const char* path) {
  return guard([&] {
    need(report, "report");
    need(format, "format");
    need(path, "path");
    mfld::write_report(report->report, mfld::parse_format(format), path);
  });
}

mfld_status mfld_report_read(const char* json_path, mfld_report** out) {
  return guard([&] {
    need(json_path, "json_path");
    need(out, "out");
    *out = new mfld_report{mfld::read_report(json_path)};
  });
}

void mfld_report_free(mfld_report* report) { delete report; }

mfld_status mfld_ball_capacity(double radius, double dim, double* out) {
  return guard([&] {
    need(out, "out");
    *out = mfld::ball_capacity(radius, dim);
  });
}

mfld_status mfld_participation_ratio(const double* eigenvalues, size_t n, double* out) {
  return guard([&] {
    need(eigenvalues, "eigenvalues");
    need(out, "out");
    *out = mfld::participation_ratio(Eigen::Map<const mfld::Vector>(eigenvalues, static_cast<Eigen::Index>(n)));
  });
}

mfld_status mfld_explained_variance_dim(const double* eigenvalues, size_t n, double threshold, size_t* out) {
  return guard([&] {
    need(eigenvalues, "eigenvalues");
    need(out, "out");
    *out = static_cast<size_t>(
        mfld::explained_variance_dim(Eigen::Map<const mfld::Vector>(eigenvalues, static_cast<Eigen::Index>(n)), threshold));
  });
}

}  // extern "C"
