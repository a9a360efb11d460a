#pragma once

#include "lmt/baselines.hpp"
#include "lmt/common.hpp"
#include "lmt/diagnostics.hpp"
#include "lmt/lmt_core.hpp"
#include "lmt/objectives.hpp"
#include "lmt/topology.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lmt {

struct TopologyConfig {
  std::string kind = "ring";  // ring | complete | file
  int n = 20;
  std::string path;           // kind = file
};

struct ObjectiveConfig {
  std::string kind = "quadratic";  // quadratic | logistic_l2 | logistic_nonconvex
  // logistic objectives: a dataset file, or synthetic two-class data when empty
  std::string dataset;
  long samples = 2000;
  int dim = 50;
  double separation = 1.0;
  double rho = 0.2;
  double omega = 0.05;
  int batch = 1;
  std::string sampling = "with_replacement";  // with_replacement | without_replacement
  // quadratic
  int p = 10;
  double mu = 0.1;
  double L = 1.0;
  double sigma = 1.0;
  std::uint64_t seed = 1;  // data / problem instance seed, shared by all trials
};

struct ScheduleConfig {
  std::string kind = "figure1";  // explicit | theorem1 | theorem2 | figure1
  std::optional<double> eta_a;
  std::optional<double> eta_s;
  std::optional<double> eta_hat;  // explicit only: eta_s = eta_hat / (eta_a Q)
  std::optional<double> beta;     // defaults to rho_w
  std::optional<double> eta_w;    // defaults to the topology's LCA value
  std::optional<long> T;          // theorem schedules; defaults to rounds
  std::optional<double> delta_f;  // theorem1; defaults to f(x̄_0) - f*
  std::optional<double> mu;       // theorem2; defaults to the oracle's PL modulus
  std::optional<int> reference_q; // theorem1: take eta_hat from this Q, eta_a from the run's Q
};

struct ExperimentConfig {
  TopologyConfig topology;
  ObjectiveConfig objective;
  std::string method = "lmt";
  ScheduleConfig schedule;
  long rounds = 100;
  int Q = 1;
  int trials = 10;
  std::uint64_t seed = 0;
  std::string init = "zero";  // zero | gaussian | optimum
  double init_scale = 1.0;
  std::string output;         // empty: nothing written
  int threads = 0;            // 0: hardware concurrency
};

/// Flat "key = value" text; "[section]" lines prefix the keys that follow,
/// '#' starts a comment. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one key = value override with the same validation as parsing.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
/// Canonical sorted key/value view of every field.
std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg);
/// Field-level checks; throws Configuration with the offending key in the message.
void validate_config(const ExperimentConfig& cfg);
/// 16 hex digits, FNV-1a over the canonical entries.
std::string config_fingerprint(const ExperimentConfig& cfg);

inline constexpr std::array<std::string_view, 7> kMetricNames{
    "consensus_x", "consensus_y", "grad_norm_avg", "opt_gap_mean", "z_dev", "lyapunov_surrogate", "d_bar_drift"};

/// Per-round mean and standard deviation (over trials) of every metric.
struct ResultTable {
  std::string label;
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::vector<long> t;
  std::map<std::string, std::vector<double>, std::less<>> mean;
  std::map<std::string, std::vector<double>, std::less<>> stddev;

  std::size_t rows() const { return t.size(); }
  bool has_metric(std::string_view metric) const { return mean.find(metric) != mean.end(); }
  const std::vector<double>& mean_of(std::string_view metric) const;
  const std::vector<double>& stddev_of(std::string_view metric) const;
  /// Mean of the metric over the last ceil(10%) of rows.
  double final_window_mean(std::string_view metric) const;
};

/// Everything derived from a config before trials start.
struct ExperimentSetup {
  MixingMatrix mixing;
  LcaParams lca;
  std::shared_ptr<const GradientOracle> oracle;
  Method method;
  HyperParams hp;             // LMT-form parameters
  BaselineSpec baseline;      // mapped steps when method is a baseline
  std::optional<Vec> optimum; // minimizer when known or solved
  std::vector<std::string> warnings;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

/// Initial stacked iterate of one trial.
Mat initial_iterate(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::uint64_t trial);

/// Runs one trial and returns its per-round trace.
std::vector<RoundTrace> run_trial(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::uint64_t trial);

/// Aggregates trials in trial order (population standard deviation).
ResultTable aggregate_trials(const std::vector<std::vector<RoundTrace>>& trials);

/// Runs cfg.trials trials (in parallel when threads allow), aggregates, and when
/// cfg.output is set writes trace.csv and meta.json there.
ResultTable run_experiment(const ExperimentConfig& cfg);

enum class SweepAxis { Q, N, Method };

struct SweepPoint {
  std::string value;
  ResultTable table;
};

struct SweepResult {
  SweepAxis axis;
  std::vector<SweepPoint> points;
  /// Least-squares slope of log(final-window grad_norm_avg) against log(Q); Q sweeps only.
  std::optional<double> loglog_slope;
};

SweepAxis parse_sweep_axis(std::string_view axis);
/// One experiment per value (output in <output>/<axis>=<value>/) plus <output>/summary.csv.
SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<std::string>& values);

/// Slope of the least-squares line through (log x, log y).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Header: t,consensus_x,consensus_y,grad_norm_avg,grad_norm_avg_std,opt_gap_mean,
/// opt_gap_mean_std,z_dev,lyapunov_surrogate,d_bar_drift
std::string trace_csv(const ResultTable& table);
void write_trace_csv(const ResultTable& table, const std::filesystem::path& path);
ResultTable read_trace_csv(const std::filesystem::path& path);

/// Static SVG: log-scale y, one polyline per table, shaded +-1 std band, legend from labels.
std::string render_plot_svg(const std::vector<ResultTable>& tables, std::string_view metric);
void emit_plot(const std::vector<ResultTable>& tables, std::string_view metric, const std::filesystem::path& path);

}  // namespace lmt
