#include "lmt/lmt.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CliError {
  int code;
};

void check(int rc) {
  if (rc == LMT_OK) return;
  std::fprintf(stderr, "error: %s: %s\n", lmt_error_string(rc), lmt_last_error());
  throw CliError{lmt_error_is_config(rc) ? kExitConfig : kExitRuntime};
}

// RAII owners for the opaque handles.
template <class H, int (*Destroy)(H)>
class Handle {
 public:
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : h_(o.h_) { o.h_ = nullptr; }
  ~Handle() { Destroy(h_); }
  H* out() { return &h_; }
  H get() const { return h_; }

 private:
  H h_ = nullptr;
};

using Config = Handle<lmt_config_t, lmt_config_destroy>;
using Result = Handle<lmt_result_t, lmt_result_destroy>;
using Sweep = Handle<lmt_sweep_t, lmt_sweep_destroy>;
using Mixing = Handle<lmt_mixing_t, lmt_mixing_destroy>;

std::string fingerprint(lmt_result_t r) {
  char buf[64];
  size_t len = sizeof buf;
  check(lmt_result_fingerprint(r, buf, &len));
  return buf;
}

double final_mean(lmt_result_t r, const char* metric) {
  double v = 0.0;
  check(lmt_result_final_window_mean(r, metric, &v));
  return v;
}

void load_config(Config& cfg, const std::string& path, const std::vector<std::string>& overrides,
                 const std::string& output) {
  check(lmt_config_load(cfg.out(), path.c_str()));
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      throw CliError{kExitConfig};
    }
    check(lmt_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (!output.empty()) check(lmt_config_set(cfg.get(), "output", output.c_str()));
  check(lmt_config_validate(cfg.get()));
}

void print_summary(lmt_result_t r) {
  size_t rows = 0;
  check(lmt_result_rows(r, &rows));
  std::printf("fingerprint   %s\n", fingerprint(r).c_str());
  std::printf("rounds        %zu\n", rows);
  for (const char* m : {"consensus_x", "grad_norm_avg", "opt_gap_mean"}) {
    std::printf("%-13s %.6e\n", m, final_mean(r, m));
  }
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides, const std::string& output) {
  Config cfg;
  load_config(cfg, path, overrides, output);
  Result res;
  check(lmt_run(cfg.get(), res.out()));
  print_summary(res.get());
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& axis, const std::vector<std::string>& values,
              const std::vector<std::string>& overrides, const std::string& output) {
  Config cfg;
  load_config(cfg, path, overrides, output);
  std::vector<const char*> raw;
  for (const auto& v : values) raw.push_back(v.c_str());
  Sweep sweep;
  check(lmt_sweep(cfg.get(), axis.c_str(), raw.data(), raw.size(), sweep.out()));
  size_t count = 0;
  check(lmt_sweep_size(sweep.get(), &count));
  std::printf("%-12s %-14s %-14s %-14s\n", axis.c_str(), "consensus_x", "grad_norm_avg", "opt_gap_mean");
  for (size_t k = 0; k < count; ++k) {
    Result point;
    check(lmt_sweep_point(sweep.get(), k, point.out()));
    std::printf("%-12s %-14.6e %-14.6e %-14.6e\n", values[k].c_str(), final_mean(point.get(), "consensus_x"),
                final_mean(point.get(), "grad_norm_avg"), final_mean(point.get(), "opt_gap_mean"));
  }
  double slope = 0.0;
  int has_slope = 0;
  check(lmt_sweep_slope(sweep.get(), &slope, &has_slope));
  if (has_slope) std::printf("loglog_slope %.6f\n", slope);
  return 0;
}

int cmd_spectra(const std::vector<std::string>& args) {
  if (args.empty()) {
    std::fprintf(stderr, "error: spectra expects 'ring <n>', 'complete <n>' or 'file <path>'\n");
    return kExitConfig;
  }
  Mixing mix;
  const std::string& kind = args[0];
  if ((kind == "ring" || kind == "complete") && args.size() == 2) {
    int n = 0;
    try {
      size_t used = 0;
      n = std::stoi(args[1], &used);
      if (used != args[1].size()) throw std::invalid_argument(args[1]);
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: expected an integer agent count, got '%s'\n", args[1].c_str());
      return kExitConfig;
    }
    check(kind == "ring" ? lmt_mixing_ring(mix.out(), n) : lmt_mixing_complete(mix.out(), n));
  } else if (kind == "file" && args.size() == 2) {
    check(lmt_mixing_load(mix.out(), args[1].c_str()));
  } else {
    std::fprintf(stderr, "error: spectra expects 'ring <n>', 'complete <n>' or 'file <path>'\n");
    return kExitConfig;
  }
  lmt_spectra s{};
  check(lmt_mixing_spectra(mix.get(), &s));
  int n = 0;
  check(lmt_mixing_size(mix.get(), &n));
  std::printf("n         %d\n", n);
  std::printf("lambda    %.10f\n", s.lambda);
  std::printf("1-lambda  %.6e\n", s.spectral_gap);
  std::printf("eta_w     %.10f\n", s.eta_w);
  std::printf("rho_w     %.10f\n", s.rho_w);
  return 0;
}

int cmd_plot(const std::vector<std::string>& files, const std::vector<std::string>& labels, const std::string& metric,
             const std::string& output) {
  if (!labels.empty() && labels.size() != files.size()) {
    std::fprintf(stderr, "error: give one --label per trace file\n");
    return kExitConfig;
  }
  std::vector<Result> tables;
  tables.reserve(files.size());
  std::vector<lmt_result_t> raw;
  for (size_t k = 0; k < files.size(); ++k) {
    tables.emplace_back();
    check(lmt_result_read_csv(tables.back().out(), files[k].c_str()));
    if (!labels.empty()) check(lmt_result_set_label(tables.back().get(), labels[k].c_str()));
    raw.push_back(tables.back().get());
  }
  check(lmt_plot(raw.data(), raw.size(), metric.c_str(), output.c_str()));
  std::printf("wrote %s\n", output.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized local-update optimization simulator"};
  app.require_subcommand(1);

  std::string config_path, output, axis, metric = "grad_norm_avg", plot_out = "plot.svg";
  std::vector<std::string> overrides, values, spectra_args, files, labels;

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  run->add_option("-o,--output", output, "Output directory for trace.csv and meta.json");

  auto* sweep = app.add_subcommand("sweep", "Run one experiment per axis value");
  sweep->add_option("config", config_path, "Config file")->required();
  sweep->add_option("--axis", axis, "Q | n | method")->required();
  sweep->add_option("--values", values, "Axis values")->required();
  sweep->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  sweep->add_option("-o,--output", output, "Output directory");

  auto* spectra = app.add_subcommand("spectra", "Print lambda, 1-lambda, eta_w and rho_w of a topology");
  spectra->add_option("topology", spectra_args, "ring <n> | complete <n> | file <path>")->required();

  auto* plot = app.add_subcommand("plot", "Render trace CSV files as an SVG plot");
  plot->add_option("traces", files, "trace.csv files")->required();
  plot->add_option("--metric", metric, "Metric column to plot");
  plot->add_option("--label", labels, "Legend label per file");
  plot->add_option("-o,--output", plot_out, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, overrides, output);
    if (*sweep) return cmd_sweep(config_path, axis, values, overrides, output);
    if (*spectra) return cmd_spectra(spectra_args);
    if (*plot) return cmd_plot(files, labels, metric, plot_out);
  } catch (const CliError& e) {
    return e.code;
  }
  return 0;
}
