#include "lmt/lmt.h"

#include "lmt/harness.hpp"

#include <cstdint>
#include <cstring>
#include <new>
#include <string>

namespace {

constexpr std::uint32_t kMixingMagic = 0x4c4d5801;
constexpr std::uint32_t kConfigMagic = 0x4c4d5802;
constexpr std::uint32_t kResultMagic = 0x4c4d5803;
constexpr std::uint32_t kSweepMagic = 0x4c4d5804;

thread_local std::string g_last_error;

int code_for(lmt::ErrorKind kind) {
  switch (kind) {
    case lmt::ErrorKind::InvalidTopology: return LMT_ERROR_INVALID_TOPOLOGY;
    case lmt::ErrorKind::Validation: return LMT_ERROR_VALIDATION;
    case lmt::ErrorKind::Domain: return LMT_ERROR_DOMAIN;
    case lmt::ErrorKind::Dimension: return LMT_ERROR_DIMENSION;
    case lmt::ErrorKind::Configuration: return LMT_ERROR_CONFIGURATION;
    case lmt::ErrorKind::Parse: return LMT_ERROR_PARSE;
    case lmt::ErrorKind::UnsupportedDataset: return LMT_ERROR_UNSUPPORTED_DATASET;
    case lmt::ErrorKind::Parameter: return LMT_ERROR_PARAMETER;
    case lmt::ErrorKind::UnavailableMetric: return LMT_ERROR_UNAVAILABLE_METRIC;
    case lmt::ErrorKind::Io: return LMT_ERROR_IO;
    case lmt::ErrorKind::Runtime: return LMT_ERROR_RUNTIME;
  }
  return LMT_ERROR_UNKNOWN;
}

int set_error(int code, const char* what) {
  g_last_error = what;
  return code;
}

template <class F>
int guard(F&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const lmt::Error& e) {
    return set_error(code_for(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(LMT_ERROR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return set_error(LMT_ERROR_UNKNOWN, e.what());
  } catch (...) {
    return set_error(LMT_ERROR_UNKNOWN, "unknown exception");
  }
}

int copy_string(const std::string& s, char* out, size_t* len) {
  if (!len) return set_error(LMT_ERROR_NULL_POINTER, "length pointer is NULL");
  const size_t need = s.size() + 1;
  if (!out || *len < need) {
    *len = need;
    return set_error(LMT_ERROR_INSUFFICIENT_BUFFER, "buffer too small");
  }
  std::memcpy(out, s.c_str(), need);
  *len = need;
  return LMT_OK;
}

}  // namespace

struct lmt_mixing_struct {
  std::uint32_t magic = kMixingMagic;
  lmt::MixingMatrix m;
};

struct lmt_config_struct {
  std::uint32_t magic = kConfigMagic;
  lmt::ExperimentConfig cfg;
};

struct lmt_result_struct {
  std::uint32_t magic = kResultMagic;
  lmt::ResultTable table;
};

struct lmt_sweep_struct {
  std::uint32_t magic = kSweepMagic;
  lmt::SweepResult result;
};

namespace {

template <class H>
bool valid(const H* h, std::uint32_t magic) {
  return h != nullptr && h->magic == magic;
}

#define LMT_CHECK_HANDLE(h, magic)                                                      \
  do {                                                                                  \
    if (!(h)) return set_error(LMT_ERROR_NULL_POINTER, "handle is NULL");               \
    if (!valid(h, magic)) return set_error(LMT_ERROR_INVALID_HANDLE, "invalid handle"); \
  } while (0)

#define LMT_CHECK_PTR(p) \
  do {                   \
    if (!(p)) return set_error(LMT_ERROR_NULL_POINTER, #p " is NULL"); \
  } while (0)

template <class H>
int destroy(H* h, std::uint32_t magic) {
  if (!h) return LMT_OK;
  if (!valid(h, magic)) return set_error(LMT_ERROR_INVALID_HANDLE, "invalid handle");
  h->magic = 0;
  delete h;
  return LMT_OK;
}

}  // namespace

extern "C" {

const char* lmt_error_string(int code) {
  switch (code) {
    case LMT_OK: return "ok";
    case LMT_ERROR_INVALID_TOPOLOGY: return "invalid topology";
    case LMT_ERROR_VALIDATION: return "validation error";
    case LMT_ERROR_DOMAIN: return "domain error";
    case LMT_ERROR_DIMENSION: return "dimension mismatch";
    case LMT_ERROR_CONFIGURATION: return "configuration error";
    case LMT_ERROR_PARSE: return "parse error";
    case LMT_ERROR_UNSUPPORTED_DATASET: return "unsupported dataset";
    case LMT_ERROR_PARAMETER: return "parameter error";
    case LMT_ERROR_UNAVAILABLE_METRIC: return "unavailable metric";
    case LMT_ERROR_IO: return "i/o error";
    case LMT_ERROR_RUNTIME: return "runtime error";
    case LMT_ERROR_NULL_POINTER: return "null pointer";
    case LMT_ERROR_INVALID_HANDLE: return "invalid handle";
    case LMT_ERROR_INSUFFICIENT_BUFFER: return "insufficient buffer";
    case LMT_ERROR_OUT_OF_RANGE: return "index out of range";
    default: return "unknown error";
  }
}

const char* lmt_last_error(void) { return g_last_error.c_str(); }

int lmt_error_is_config(int code) {
  switch (code) {
    case LMT_ERROR_INVALID_TOPOLOGY:
    case LMT_ERROR_VALIDATION:
    case LMT_ERROR_CONFIGURATION:
    case LMT_ERROR_PARSE:
    case LMT_ERROR_UNSUPPORTED_DATASET:
    case LMT_ERROR_PARAMETER:
      return 1;
    default:
      return 0;
  }
}

int lmt_mixing_ring(lmt_mixing_t* out, int n) {
  LMT_CHECK_PTR(out);
  return guard([&]() -> int {
    *out = new lmt_mixing_struct{kMixingMagic, lmt::build_ring_mixing(n)};
    return LMT_OK;
  });
}

int lmt_mixing_complete(lmt_mixing_t* out, int n) {
  LMT_CHECK_PTR(out);
  return guard([&]() -> int {
    *out = new lmt_mixing_struct{kMixingMagic, lmt::build_complete_mixing(n)};
    return LMT_OK;
  });
}

int lmt_mixing_load(lmt_mixing_t* out, const char* path) {
  LMT_CHECK_PTR(out);
  LMT_CHECK_PTR(path);
  return guard([&]() -> int {
    *out = new lmt_mixing_struct{kMixingMagic, lmt::read_mixing_csv(path)};
    return LMT_OK;
  });
}

int lmt_mixing_save(lmt_mixing_t m, const char* path) {
  LMT_CHECK_HANDLE(m, kMixingMagic);
  LMT_CHECK_PTR(path);
  return guard([&]() -> int {
    lmt::write_mixing_csv(path, m->m.weights());
    return LMT_OK;
  });
}

int lmt_mixing_size(lmt_mixing_t m, int* n) {
  LMT_CHECK_HANDLE(m, kMixingMagic);
  LMT_CHECK_PTR(n);
  *n = m->m.n();
  return LMT_OK;
}

int lmt_mixing_weights(lmt_mixing_t m, double* out, size_t len) {
  LMT_CHECK_HANDLE(m, kMixingMagic);
  LMT_CHECK_PTR(out);
  const auto& w = m->m.weights();
  const auto need = static_cast<size_t>(w.size());
  if (len < need) return set_error(LMT_ERROR_INSUFFICIENT_BUFFER, "buffer too small");
  std::memcpy(out, w.data(), need * sizeof(double));
  return LMT_OK;
}

int lmt_mixing_spectra(lmt_mixing_t m, lmt_spectra* out) {
  LMT_CHECK_HANDLE(m, kMixingMagic);
  LMT_CHECK_PTR(out);
  return guard([&]() -> int {
    const lmt::LcaParams lca = lmt::lca_params(m->m.lambda());
    *out = lmt_spectra{m->m.lambda(), m->m.spectral_gap(), lca.eta_w, lca.rho_w, static_cast<double>(lca.c0)};
    return LMT_OK;
  });
}

int lmt_mixing_destroy(lmt_mixing_t m) { return destroy(m, kMixingMagic); }

int lmt_config_load(lmt_config_t* out, const char* path) {
  LMT_CHECK_PTR(out);
  LMT_CHECK_PTR(path);
  return guard([&]() -> int {
    *out = new lmt_config_struct{kConfigMagic, lmt::load_config(path)};
    return LMT_OK;
  });
}

int lmt_config_parse(lmt_config_t* out, const char* text, const char* base_dir) {
  LMT_CHECK_PTR(out);
  LMT_CHECK_PTR(text);
  return guard([&]() -> int {
    const std::filesystem::path base = base_dir ? std::filesystem::path(base_dir) : std::filesystem::path();
    *out = new lmt_config_struct{kConfigMagic, lmt::parse_config(text, base)};
    return LMT_OK;
  });
}

int lmt_config_set(lmt_config_t cfg, const char* key, const char* value) {
  LMT_CHECK_HANDLE(cfg, kConfigMagic);
  LMT_CHECK_PTR(key);
  LMT_CHECK_PTR(value);
  return guard([&]() -> int {
    lmt::set_config_value(cfg->cfg, key, value);
    return LMT_OK;
  });
}

int lmt_config_validate(lmt_config_t cfg) {
  LMT_CHECK_HANDLE(cfg, kConfigMagic);
  return guard([&]() -> int {
    lmt::validate_config(cfg->cfg);
    return LMT_OK;
  });
}

int lmt_config_fingerprint(lmt_config_t cfg, char* out, size_t* len) {
  LMT_CHECK_HANDLE(cfg, kConfigMagic);
  return guard([&]() -> int { return copy_string(lmt::config_fingerprint(cfg->cfg), out, len); });
}

int lmt_config_destroy(lmt_config_t cfg) { return destroy(cfg, kConfigMagic); }

int lmt_run(lmt_config_t cfg, lmt_result_t* out) {
  LMT_CHECK_HANDLE(cfg, kConfigMagic);
  LMT_CHECK_PTR(out);
  return guard([&]() -> int {
    *out = new lmt_result_struct{kResultMagic, lmt::run_experiment(cfg->cfg)};
    return LMT_OK;
  });
}

int lmt_result_read_csv(lmt_result_t* out, const char* path) {
  LMT_CHECK_PTR(out);
  LMT_CHECK_PTR(path);
  return guard([&]() -> int {
    *out = new lmt_result_struct{kResultMagic, lmt::read_trace_csv(path)};
    return LMT_OK;
  });
}

int lmt_result_write_csv(lmt_result_t r, const char* path) {
  LMT_CHECK_HANDLE(r, kResultMagic);
  LMT_CHECK_PTR(path);
  return guard([&]() -> int {
    lmt::write_trace_csv(r->table, path);
    return LMT_OK;
  });
}

int lmt_result_rows(lmt_result_t r, size_t* rows) {
  LMT_CHECK_HANDLE(r, kResultMagic);
  LMT_CHECK_PTR(rows);
  *rows = r->table.rows();
  return LMT_OK;
}

int lmt_result_column(lmt_result_t r, const char* metric, int stddev, double* out, size_t len) {
  LMT_CHECK_HANDLE(r, kResultMagic);
  LMT_CHECK_PTR(metric);
  LMT_CHECK_PTR(out);
  return guard([&]() -> int {
    const auto& col = stddev ? r->table.stddev_of(metric) : r->table.mean_of(metric);
    if (col.empty() && r->table.rows() > 0) {
      return set_error(LMT_ERROR_UNAVAILABLE_METRIC, "no standard deviation recorded for this metric");
    }
    if (len < col.size()) return set_error(LMT_ERROR_INSUFFICIENT_BUFFER, "buffer too small");
    std::copy(col.begin(), col.end(), out);
    return LMT_OK;
  });
}

int lmt_result_final_window_mean(lmt_result_t r, const char* metric, double* out) {
  LMT_CHECK_HANDLE(r, kResultMagic);
  LMT_CHECK_PTR(metric);
  LMT_CHECK_PTR(out);
  return guard([&]() -> int {
    *out = r->table.final_window_mean(metric);
    return LMT_OK;
  });
}

int lmt_result_fingerprint(lmt_result_t r, char* out, size_t* len) {
  LMT_CHECK_HANDLE(r, kResultMagic);
  return guard([&]() -> int { return copy_string(r->table.fingerprint, out, len); });
}

int lmt_result_label(lmt_result_t r, char* out, size_t* len) {
  LMT_CHECK_HANDLE(r, kResultMagic);
  return guard([&]() -> int { return copy_string(r->table.label, out, len); });
}

int lmt_result_set_label(lmt_result_t r, const char* label) {
  LMT_CHECK_HANDLE(r, kResultMagic);
  LMT_CHECK_PTR(label);
  return guard([&]() -> int {
    r->table.label = label;
    return LMT_OK;
  });
}

int lmt_result_destroy(lmt_result_t r) { return destroy(r, kResultMagic); }

int lmt_sweep(lmt_config_t cfg, const char* axis, const char* const* values, size_t count, lmt_sweep_t* out) {
  LMT_CHECK_HANDLE(cfg, kConfigMagic);
  LMT_CHECK_PTR(axis);
  LMT_CHECK_PTR(out);
  if (count > 0) LMT_CHECK_PTR(values);
  return guard([&]() -> int {
    std::vector<std::string> vals;
    for (size_t k = 0; k < count; ++k) {
      if (!values[k]) return set_error(LMT_ERROR_NULL_POINTER, "sweep value is NULL");
      vals.emplace_back(values[k]);
    }
    *out = new lmt_sweep_struct{kSweepMagic, lmt::run_sweep(cfg->cfg, lmt::parse_sweep_axis(axis), vals)};
    return LMT_OK;
  });
}

int lmt_sweep_size(lmt_sweep_t s, size_t* count) {
  LMT_CHECK_HANDLE(s, kSweepMagic);
  LMT_CHECK_PTR(count);
  *count = s->result.points.size();
  return LMT_OK;
}

int lmt_sweep_slope(lmt_sweep_t s, double* slope, int* has_slope) {
  LMT_CHECK_HANDLE(s, kSweepMagic);
  LMT_CHECK_PTR(slope);
  LMT_CHECK_PTR(has_slope);
  *has_slope = s->result.loglog_slope.has_value() ? 1 : 0;
  *slope = s->result.loglog_slope.value_or(0.0);
  return LMT_OK;
}

int lmt_sweep_point(lmt_sweep_t s, size_t index, lmt_result_t* out) {
  LMT_CHECK_HANDLE(s, kSweepMagic);
  LMT_CHECK_PTR(out);
  if (index >= s->result.points.size()) return set_error(LMT_ERROR_OUT_OF_RANGE, "sweep index out of range");
  return guard([&]() -> int {
    *out = new lmt_result_struct{kResultMagic, s->result.points[index].table};
    return LMT_OK;
  });
}

int lmt_sweep_destroy(lmt_sweep_t s) { return destroy(s, kSweepMagic); }

int lmt_plot(const lmt_result_t* tables, size_t count, const char* metric, const char* path) {
  LMT_CHECK_PTR(metric);
  LMT_CHECK_PTR(path);
  if (count > 0) LMT_CHECK_PTR(tables);
  std::vector<lmt::ResultTable> list;
  for (size_t k = 0; k < count; ++k) {
    LMT_CHECK_HANDLE(tables[k], kResultMagic);
  }
  return guard([&]() -> int {
    for (size_t k = 0; k < count; ++k) list.push_back(tables[k]->table);
    lmt::emit_plot(list, metric, path);
    return LMT_OK;
  });
}

int lmt_q_star(double lambda, double sigma, int n, double epsilon, long* out) {
  LMT_CHECK_PTR(out);
  return guard([&]() -> int {
    *out = lmt::q_star(lambda, sigma, n, epsilon);
    return LMT_OK;
  });
}

}  // extern "C"
