#include "lmt/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace lmt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void config_error(std::string_view key, const std::string& what) {
  fail(ErrorKind::Configuration, "config error: " + std::string(key) + ": " + what);
}

long to_long(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long out = std::stol(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  config_error(key, "expected an integer, got '" + v + "'");
}

int to_int(std::string_view key, const std::string& v) {
  const long out = to_long(key, v);
  if (out < std::numeric_limits<int>::min() || out > std::numeric_limits<int>::max()) {
    config_error(key, "integer out of range: " + v);
  }
  return static_cast<int>(out);
}

std::uint64_t to_u64(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() != '-') {
      const unsigned long long out = std::stoull(v, &used);
      if (used == v.size()) return out;
    }
  } catch (const std::exception&) {
  }
  config_error(key, "expected a nonnegative integer, got '" + v + "'");
}

double to_double(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size() && std::isfinite(out)) return out;
  } catch (const std::exception&) {
  }
  config_error(key, "expected a finite number, got '" + v + "'");
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

template <class T>
std::string opt_string(const std::optional<T>& v) {
  if (!v) return "none";
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p;
  const std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (base / path).lexically_normal().string();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void set_config_value(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in) {
  const std::string key = trim(key_in);
  const std::string v = unquote(trim(value_in));
  auto& top = cfg.topology;
  auto& obj = cfg.objective;
  auto& sch = cfg.schedule;

  if (key == "topology.kind") top.kind = v;
  else if (key == "topology.n") top.n = to_int(key, v);
  else if (key == "topology.path") top.path = v;
  else if (key == "objective.kind") obj.kind = v;
  else if (key == "objective.dataset") obj.dataset = v;
  else if (key == "objective.samples") obj.samples = to_long(key, v);
  else if (key == "objective.dim") obj.dim = to_int(key, v);
  else if (key == "objective.separation") obj.separation = to_double(key, v);
  else if (key == "objective.rho") obj.rho = to_double(key, v);
  else if (key == "objective.omega") obj.omega = to_double(key, v);
  else if (key == "objective.batch") obj.batch = to_int(key, v);
  else if (key == "objective.sampling") obj.sampling = v;
  else if (key == "objective.p") obj.p = to_int(key, v);
  else if (key == "objective.mu") obj.mu = to_double(key, v);
  else if (key == "objective.L") obj.L = to_double(key, v);
  else if (key == "objective.sigma") obj.sigma = to_double(key, v);
  else if (key == "objective.seed") obj.seed = to_u64(key, v);
  else if (key == "schedule.kind") sch.kind = v;
  else if (key == "schedule.eta_a") sch.eta_a = to_double(key, v);
  else if (key == "schedule.eta_s") sch.eta_s = to_double(key, v);
  else if (key == "schedule.eta_hat") sch.eta_hat = to_double(key, v);
  else if (key == "schedule.beta") sch.beta = to_double(key, v);
  else if (key == "schedule.eta_w") sch.eta_w = to_double(key, v);
  else if (key == "schedule.T") sch.T = to_long(key, v);
  else if (key == "schedule.delta_f") sch.delta_f = to_double(key, v);
  else if (key == "schedule.mu") sch.mu = to_double(key, v);
  else if (key == "schedule.reference_q") sch.reference_q = to_int(key, v);
  else if (key == "method") cfg.method = v;
  else if (key == "rounds" || key == "T") cfg.rounds = to_long(key, v);
  else if (key == "Q") cfg.Q = to_int(key, v);
  else if (key == "trials") cfg.trials = to_int(key, v);
  else if (key == "seed") cfg.seed = to_u64(key, v);
  else if (key == "init") cfg.init = v;
  else if (key == "init_scale") cfg.init_scale = to_double(key, v);
  else if (key == "output") cfg.output = v;
  else if (key == "threads") cfg.threads = to_int(key, v);
  else config_error(key, "unknown key");
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  std::string section;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(ErrorKind::Configuration, "config error: line " + std::to_string(lineno) +
                                                               ": unterminated section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::Configuration, "config error: line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(std::string_view(s).substr(0, eq));
    if (key.empty()) fail(ErrorKind::Configuration, "config error: line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    try {
      set_config_value(cfg, key, std::string_view(s).substr(eq + 1));
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
  }
  cfg.topology.path = resolve_path(cfg.topology.path, base_dir);
  cfg.objective.dataset = resolve_path(cfg.objective.dataset, base_dir);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Configuration, "config error: cannot open " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  ExperimentConfig cfg = parse_config(buf.str(), path.parent_path());
  validate_config(cfg);
  return cfg;
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg) {
  const auto& top = cfg.topology;
  const auto& obj = cfg.objective;
  const auto& sch = cfg.schedule;
  return {
      {"topology.kind", top.kind},
      {"topology.n", std::to_string(top.n)},
      {"topology.path", top.path},
      {"objective.kind", obj.kind},
      {"objective.dataset", obj.dataset},
      {"objective.samples", std::to_string(obj.samples)},
      {"objective.dim", std::to_string(obj.dim)},
      {"objective.separation", format_double(obj.separation)},
      {"objective.rho", format_double(obj.rho)},
      {"objective.omega", format_double(obj.omega)},
      {"objective.batch", std::to_string(obj.batch)},
      {"objective.sampling", obj.sampling},
      {"objective.p", std::to_string(obj.p)},
      {"objective.mu", format_double(obj.mu)},
      {"objective.L", format_double(obj.L)},
      {"objective.sigma", format_double(obj.sigma)},
      {"objective.seed", std::to_string(obj.seed)},
      {"schedule.kind", sch.kind},
      {"schedule.eta_a", opt_string(sch.eta_a)},
      {"schedule.eta_s", opt_string(sch.eta_s)},
      {"schedule.eta_hat", opt_string(sch.eta_hat)},
      {"schedule.beta", opt_string(sch.beta)},
      {"schedule.eta_w", opt_string(sch.eta_w)},
      {"schedule.T", opt_string(sch.T)},
      {"schedule.delta_f", opt_string(sch.delta_f)},
      {"schedule.mu", opt_string(sch.mu)},
      {"schedule.reference_q", opt_string(sch.reference_q)},
      {"method", cfg.method},
      {"rounds", std::to_string(cfg.rounds)},
      {"Q", std::to_string(cfg.Q)},
      {"trials", std::to_string(cfg.trials)},
      {"seed", std::to_string(cfg.seed)},
      {"init", cfg.init},
      {"init_scale", format_double(cfg.init_scale)},
      {"output", cfg.output},
      {"threads", std::to_string(cfg.threads)},
  };
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& top = cfg.topology;
  const auto& obj = cfg.objective;
  const auto& sch = cfg.schedule;

  if (top.kind == "ring") {
    if (top.n < 3) config_error("topology.n", "a ring needs n >= 3");
  } else if (top.kind == "complete") {
    if (top.n < 1) config_error("topology.n", "must be >= 1");
  } else if (top.kind == "file") {
    if (top.path.empty()) config_error("topology.path", "required when topology.kind = file");
    if (!std::filesystem::exists(top.path)) config_error("topology.path", "file not found: " + top.path);
  } else {
    config_error("topology.kind", "expected ring | complete | file, got '" + top.kind + "'");
  }

  if (obj.kind == "quadratic") {
    if (obj.p < 1) config_error("objective.p", "must be >= 1");
    if (!(obj.mu > 0.0)) config_error("objective.mu", "must be > 0");
    if (!(obj.L >= obj.mu)) config_error("objective.L", "must be >= objective.mu");
    if (!(obj.sigma >= 0.0)) config_error("objective.sigma", "must be >= 0");
  } else if (obj.kind == "logistic_l2" || obj.kind == "logistic_nonconvex") {
    if (!obj.dataset.empty()) {
      if (!std::filesystem::exists(obj.dataset)) config_error("objective.dataset", "file not found: " + obj.dataset);
    } else {
      if (obj.samples < 1) config_error("objective.samples", "must be >= 1");
      if (obj.dim < 1) config_error("objective.dim", "must be >= 1");
    }
    if (!(obj.rho >= 0.0)) config_error("objective.rho", "must be >= 0");
    if (!(obj.omega >= 0.0)) config_error("objective.omega", "must be >= 0");
    if (obj.batch < 1) config_error("objective.batch", "must be >= 1");
    if (obj.sampling != "with_replacement" && obj.sampling != "without_replacement") {
      config_error("objective.sampling", "expected with_replacement | without_replacement");
    }
  } else {
    config_error("objective.kind", "expected quadratic | logistic_l2 | logistic_nonconvex, got '" + obj.kind + "'");
  }

  try {
    (void)parse_method(cfg.method);
  } catch (const Error& e) {
    config_error("method", e.what());
  }

  if (sch.kind == "explicit") {
    if (!sch.eta_a) config_error("schedule.eta_a", "required by the explicit schedule");
    if (sch.eta_s.has_value() == sch.eta_hat.has_value()) {
      config_error("schedule.eta_s", "give exactly one of schedule.eta_s and schedule.eta_hat");
    }
  } else if (sch.kind == "theorem1" || sch.kind == "theorem2" || sch.kind == "figure1") {
    if (sch.eta_a) config_error("schedule.eta_a", "only allowed with the explicit schedule");
    if (sch.eta_s) config_error("schedule.eta_s", "only allowed with the explicit schedule");
    if (sch.eta_hat) config_error("schedule.eta_hat", "only allowed with the explicit schedule");
  } else {
    config_error("schedule.kind", "expected explicit | theorem1 | theorem2 | figure1, got '" + sch.kind + "'");
  }
  if (sch.eta_a && !(*sch.eta_a > 0.0)) config_error("schedule.eta_a", "must be > 0");
  if (sch.eta_s && !(*sch.eta_s > 0.0)) config_error("schedule.eta_s", "must be > 0");
  if (sch.eta_hat && !(*sch.eta_hat > 0.0)) config_error("schedule.eta_hat", "must be > 0");
  if (sch.beta && !(*sch.beta >= 0.0 && *sch.beta < 1.0)) config_error("schedule.beta", "must lie in [0, 1)");
  if (sch.eta_w && !(*sch.eta_w >= 0.0 && *sch.eta_w < 1.0)) config_error("schedule.eta_w", "must lie in [0, 1)");
  if (sch.T && *sch.T < 1) config_error("schedule.T", "must be >= 1");
  if (sch.delta_f && !(*sch.delta_f > 0.0)) config_error("schedule.delta_f", "must be > 0");
  if (sch.mu && !(*sch.mu > 0.0)) config_error("schedule.mu", "must be > 0");
  if (sch.reference_q && *sch.reference_q < 1) config_error("schedule.reference_q", "must be >= 1");

  if (cfg.rounds < 1) config_error("rounds", "must be >= 1");
  if (cfg.Q < 1) config_error("Q", "must be >= 1");
  if (cfg.trials < 1) config_error("trials", "must be >= 1");
  if (cfg.threads < 0) config_error("threads", "must be >= 0");
  if (cfg.init != "zero" && cfg.init != "gaussian" && cfg.init != "optimum") {
    config_error("init", "expected zero | gaussian | optimum, got '" + cfg.init + "'");
  }
  if (!(cfg.init_scale >= 0.0)) config_error("init_scale", "must be >= 0");
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : config_entries(cfg)) {
    mix(k);
    mix(std::string_view("\x1f", 1));
    mix(v);
    mix(std::string_view("\x1e", 1));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Result tables

const std::vector<double>& ResultTable::mean_of(std::string_view metric) const {
  const auto it = mean.find(metric);
  if (it == mean.end()) fail(ErrorKind::UnavailableMetric, "unknown metric '" + std::string(metric) + "'");
  return it->second;
}

const std::vector<double>& ResultTable::stddev_of(std::string_view metric) const {
  static const std::vector<double> kEmpty;
  (void)mean_of(metric);
  const auto it = stddev.find(metric);
  return it == stddev.end() ? kEmpty : it->second;
}

double ResultTable::final_window_mean(std::string_view metric) const {
  const auto& v = mean_of(metric);
  if (v.empty()) fail(ErrorKind::UnavailableMetric, "empty table");
  const std::size_t window = std::max<std::size_t>(1, (v.size() + 9) / 10);
  double sum = 0.0;
  for (std::size_t k = v.size() - window; k < v.size(); ++k) sum += v[k];
  return sum / static_cast<double>(window);
}

// ---------------------------------------------------------------------------
// Setup

namespace {

struct ObjectiveInstance {
  std::shared_ptr<const GradientOracle> oracle;
  std::optional<Vec> optimum;
};

std::string objective_key(const ExperimentConfig& cfg, int n) {
  std::string key = "n=" + std::to_string(n);
  for (const auto& [k, v] : config_entries(cfg)) {
    if (k.rfind("objective.", 0) == 0) key += ";" + k + "=" + v;
  }
  return key;
}

ObjectiveInstance build_objective(const ExperimentConfig& cfg, int n) {
  const auto& obj = cfg.objective;
  ObjectiveInstance out;
  if (obj.kind == "quadratic") {
    auto q = quadratic_pl_oracle(n, obj.p, obj.mu, obj.L, obj.sigma, obj.seed);
    out.optimum = q->minimizer();
    out.oracle = std::move(q);
    return out;
  }
  Dataset raw = obj.dataset.empty()
                    ? make_synthetic_two_class(static_cast<std::size_t>(obj.samples), obj.dim, obj.seed, obj.separation)
                    : load_dataset(obj.dataset);
  PartitionedDataset parts = partition_heterogeneous(raw, n);
  const Sampling sampling =
      obj.sampling == "without_replacement" ? Sampling::WithoutReplacement : Sampling::WithReplacement;
  if (obj.kind == "logistic_l2") {
    auto l = logistic_l2_oracle(std::move(parts), obj.rho, obj.batch, sampling);
    const CentralizedSolution sol = solve_centralized(*l);
    l->set_f_star(sol.value);
    out.optimum = sol.x;
    out.oracle = std::move(l);
  } else {
    // Nonconvex: a stationary point is not a certified global minimum, so f* stays unknown.
    out.oracle = logistic_nonconvex_oracle(std::move(parts), obj.omega, obj.batch, sampling);
  }
  return out;
}

ObjectiveInstance cached_objective(const ExperimentConfig& cfg, int n) {
  static std::mutex mutex;
  static std::map<std::string, ObjectiveInstance> cache;
  const std::string key = objective_key(cfg, n);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
  }
  ObjectiveInstance inst = build_objective(cfg, n);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, std::move(inst)).first->second;
}

MixingMatrix build_topology(const TopologyConfig& top) {
  if (top.kind == "ring") return build_ring_mixing(top.n);
  if (top.kind == "complete") return build_complete_mixing(top.n);
  return read_mixing_csv(top.path);
}

Mat gaussian_block(int n, int p, std::uint64_t seed, std::uint64_t trial, double scale) {
  // Round index past any real round keeps these streams disjoint from the gradient noise.
  const StreamFactory streams(seed, trial);
  Mat x(n, p);
  std::normal_distribution<double> normal(0.0, scale);
  for (int i = 0; i < n; ++i) {
    CounterRng rng = streams.stream(static_cast<std::uint64_t>(i), std::numeric_limits<std::uint64_t>::max(), 0);
    for (int k = 0; k < p; ++k) x(i, k) = normal(rng);
  }
  return x;
}

}  // namespace

Mat initial_iterate(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::uint64_t trial) {
  const int n = setup.mixing.n();
  const int p = setup.oracle->dim();
  if (cfg.init == "zero") return Mat::Zero(n, p);
  if (cfg.init == "gaussian") return gaussian_block(n, p, cfg.seed, trial, cfg.init_scale);
  if (!setup.optimum) fail(ErrorKind::UnavailableMetric, "init = optimum needs a known minimizer");
  return setup.optimum->transpose().replicate(n, 1);
}

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  MixingMatrix mixing = build_topology(cfg.topology);
  const int n = mixing.n();
  const SpectralInfo info = spectral_quantities(mixing.weights());
  if (!(mixing.lambda() < 1.0)) fail(ErrorKind::InvalidTopology, "topology is not connected");
  const LcaParams lca = lca_params(mixing.lambda());
  ObjectiveInstance obj = cached_objective(cfg, n);

  ExperimentSetup setup{mixing, lca, obj.oracle, parse_method(cfg.method), {}, {}, obj.optimum, info.warnings};
  const auto& sch = cfg.schedule;
  const GradientOracle& oracle = *setup.oracle;
  const long horizon = sch.T.value_or(cfg.rounds);

  HyperParams hp;
  if (sch.kind == "explicit") {
    hp.Q = cfg.Q;
    hp.eta_a = *sch.eta_a;
    hp.eta_s = sch.eta_s ? *sch.eta_s : *sch.eta_hat / (hp.eta_a * cfg.Q);
    hp.beta = sch.beta.value_or(lca.rho_w);
  } else if (sch.kind == "figure1") {
    hp = figure1_stepsizes(cfg.Q, mixing.lambda());
  } else if (sch.kind == "theorem2") {
    const auto mu = sch.mu ? sch.mu : oracle.pl_modulus();
    if (!mu) config_error("schedule.mu", "the objective has no known PL modulus; set it explicitly");
    hp = theorem2_stepsizes(*mu, cfg.Q, horizon, mixing.lambda());
  } else {
    const auto lip = oracle.smoothness();
    if (!lip) fail(ErrorKind::UnavailableMetric, "theorem1 schedule needs a smoothness constant");
    double delta_f = 0.0;
    if (sch.delta_f) {
      delta_f = *sch.delta_f;
    } else {
      const Vec x0 = row_mean(initial_iterate(cfg, setup, 0));
      // Logistic objectives are nonnegative, so f(x̄_0) bounds the gap when f* is unknown.
      delta_f = oracle.global_value(x0) - oracle.f_star().value_or(0.0);
      if (!(delta_f > 0.0)) {
        config_error("schedule.delta_f", "initial gap is not positive; set it explicitly");
      }
    }
    const double beta = sch.beta.value_or(lca.rho_w);
    const int n_agents = oracle.n_agents();
    const Theorem1Schedule run =
        theorem1_stepsizes(*lip, oracle.noise_bound(), n_agents, cfg.Q, horizon, delta_f, beta);
    hp = run.params;
    if (sch.reference_q) {
      const Theorem1Schedule ref =
          theorem1_stepsizes(*lip, oracle.noise_bound(), n_agents, *sch.reference_q, horizon, delta_f, beta);
      hp.eta_s = ref.params.eta_hat() / (hp.eta_a * cfg.Q);
    }
    const double bound = run.eta_s_bound;
    if (hp.eta_s > bound * (1.0 + 1e-12)) {
      setup.warnings.push_back("eta_s = " + format_double(hp.eta_s) + " exceeds the theorem1 bound " +
                               format_double(bound));
    }
  }
  if (sch.beta) hp.beta = *sch.beta;
  hp.eta_w = sch.eta_w.value_or(lca.eta_w);
  validate(hp);
  for (auto& w : theory_warnings(hp, lca)) setup.warnings.push_back(std::move(w));
  setup.hp = hp;
  setup.baseline = BaselineSpec{setup.method, hp.Q, stepsize_parity_map(hp.eta_a, hp.eta_s, hp.beta, setup.method),
                                hp.beta};
  return setup;
}

// ---------------------------------------------------------------------------
// Trials

namespace {

double mean_opt_gap(const GradientOracle& oracle, const Mat& x) {
  const auto f_star = oracle.f_star();
  if (!f_star) return kNaN;
  return oracle.global_values(x).mean() - *f_star;
}

void record_common(RoundTrace& tr, const GradientOracle& oracle, const Mat& x, const Vec& x_bar) {
  tr.consensus_x = consensus_error(x);
  tr.grad_norm_avg = oracle.global_gradient(x_bar).squaredNorm();
  tr.opt_gap_mean = mean_opt_gap(oracle, x);
}

std::vector<RoundTrace> run_lmt_trial(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::uint64_t trial,
                                      bool naive) {
  const GradientOracle& oracle = *setup.oracle;
  const HyperParams& hp = setup.hp;
  const StreamFactory streams(cfg.seed, trial);
  const double eta = hp.eta_hat();
  const auto lip = oracle.smoothness();
  const auto f_star = oracle.f_star();

  LmtState state = init_state(initial_iterate(cfg, setup, trial));
  Vec x_bar_prev = row_mean(state.X);
  std::vector<RoundTrace> traces;
  traces.reserve(static_cast<std::size_t>(cfg.rounds));
  for (long t = 0; t < cfg.rounds; ++t) {
    RoundTrace tr;
    tr.t = t;
    const Vec x_bar = row_mean(state.X);
    record_common(tr, oracle, state.X, x_bar);
    tr.z_dev = momentum_deviation(oracle, state.Z, x_bar);
    tr.d_bar = d_bar_sequence(x_bar, x_bar_prev, hp.beta, t);

    RoundResult res = naive ? naive_local_momentum_round(state, oracle, setup.mixing, hp, streams)
                            : lmt_round(state, oracle, setup.mixing, hp, streams);
    tr.consensus_y = consensus_error(res.outputs.Y);
    const Vec x_bar_next = row_mean(res.state.X);
    const Vec d_next = d_bar_sequence(x_bar_next, x_bar, hp.beta, t + 1);
    tr.d_bar_drift = (d_next - tr.d_bar + eta * row_mean(res.outputs.G_sum_avg)).norm();
    if (lip && f_star) {
      LyapunovTerms terms{oracle.global_value(tr.d_bar), f_star, row_mean(state.Z), tr.consensus_x,
                          tr.consensus_y, tr.z_dev, oracle.n_agents()};
      tr.lyapunov_surrogate = lyapunov_surrogate(terms, hp, *lip, setup.lca);
    } else {
      tr.lyapunov_surrogate = kNaN;
    }
    traces.push_back(std::move(tr));
    x_bar_prev = x_bar;
    state = std::move(res.state);
  }
  return traces;
}

std::vector<RoundTrace> run_baseline_trial(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                                           std::uint64_t trial) {
  const GradientOracle& oracle = *setup.oracle;
  const StreamFactory streams(cfg.seed, trial);
  BaselineState state = init_baseline_state(initial_iterate(cfg, setup, trial));
  std::vector<RoundTrace> traces;
  traces.reserve(static_cast<std::size_t>(cfg.rounds));
  for (long t = 0; t < cfg.rounds; ++t) {
    RoundTrace tr;
    tr.t = t;
    const Vec x_bar = row_mean(state.X);
    record_common(tr, oracle, state.X, x_bar);
    tr.consensus_y = kNaN;
    tr.z_dev = kNaN;
    tr.lyapunov_surrogate = kNaN;
    tr.d_bar_drift = kNaN;
    tr.d_bar = x_bar;
    traces.push_back(std::move(tr));
    state = baseline_round(setup.baseline, state, oracle, setup.mixing, streams);
  }
  return traces;
}

}  // namespace

std::vector<RoundTrace> run_trial(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::uint64_t trial) {
  try {
    switch (setup.method) {
      case Method::Lmt:
        return run_lmt_trial(cfg, setup, trial, false);
      case Method::NaiveLmt:
        return run_lmt_trial(cfg, setup, trial, true);
      default:
        return run_baseline_trial(cfg, setup, trial);
    }
  } catch (const Error& e) {
    fail(e.kind(), "trial " + std::to_string(trial) + ": " + e.what());
  }
}

ResultTable aggregate_trials(const std::vector<std::vector<RoundTrace>>& trials) {
  if (trials.empty()) fail(ErrorKind::Runtime, "no trials to aggregate");
  const std::size_t rows = trials.front().size();
  for (const auto& tr : trials) {
    if (tr.size() != rows) fail(ErrorKind::Runtime, "trials have different lengths");
  }
  using Getter = double (*)(const RoundTrace&);
  const std::array<std::pair<std::string_view, Getter>, kMetricNames.size()> getters{{
      {"consensus_x", [](const RoundTrace& r) { return r.consensus_x; }},
      {"consensus_y", [](const RoundTrace& r) { return r.consensus_y; }},
      {"grad_norm_avg", [](const RoundTrace& r) { return r.grad_norm_avg; }},
      {"opt_gap_mean", [](const RoundTrace& r) { return r.opt_gap_mean; }},
      {"z_dev", [](const RoundTrace& r) { return r.z_dev; }},
      {"lyapunov_surrogate", [](const RoundTrace& r) { return r.lyapunov_surrogate; }},
      {"d_bar_drift", [](const RoundTrace& r) { return r.d_bar_drift; }},
  }};

  ResultTable table;
  table.t.reserve(rows);
  for (std::size_t k = 0; k < rows; ++k) table.t.push_back(trials.front()[k].t);
  const double count = static_cast<double>(trials.size());
  for (const auto& [name, get] : getters) {
    std::vector<double> mean(rows), sd(rows);
    for (std::size_t k = 0; k < rows; ++k) {
      double sum = 0.0;
      for (const auto& tr : trials) sum += get(tr[k]);
      const double m = sum / count;
      double var = 0.0;
      for (const auto& tr : trials) {
        const double d = get(tr[k]) - m;
        var += d * d;
      }
      mean[k] = m;
      sd[k] = std::sqrt(var / count);
    }
    table.mean.emplace(std::string(name), std::move(mean));
    table.stddev.emplace(std::string(name), std::move(sd));
  }
  return table;
}

namespace {

void write_meta(const ExperimentConfig& cfg, const ExperimentSetup& setup, const ResultTable& table,
                const std::filesystem::path& path) {
  nlohmann::ordered_json meta;
  meta["fingerprint"] = table.fingerprint;
  meta["seed"] = cfg.seed;
  meta["method"] = cfg.method;
  meta["rounds"] = cfg.rounds;
  meta["trials"] = cfg.trials;
  meta["n"] = setup.mixing.n();
  meta["lambda"] = setup.mixing.lambda();
  meta["spectral_gap"] = setup.mixing.spectral_gap();
  meta["rho_w"] = setup.lca.rho_w;
  meta["c0"] = setup.lca.c0;
  meta["hyperparameters"] = {{"Q", setup.hp.Q},         {"eta_a", setup.hp.eta_a}, {"eta_s", setup.hp.eta_s},
                             {"eta_hat", setup.hp.eta_hat()}, {"beta", setup.hp.beta},   {"eta_w", setup.hp.eta_w}};
  if (setup.method != Method::Lmt && setup.method != Method::NaiveLmt) {
    meta["method_steps"] = {{"local", setup.baseline.steps.local}, {"outer", setup.baseline.steps.outer}};
  }
  if (const auto fs = setup.oracle->f_star()) meta["f_star"] = *fs;
  else meta["f_star"] = nullptr;
  meta["lyapunov_surrogate"] =
      "surrogate: realized consensus norms ||Pi x_t||^2 and ||Pi y_t||^2 stand in for the expectation-level sequences";
  meta["warnings"] = setup.warnings;
  nlohmann::ordered_json entries;
  for (const auto& [k, v] : config_entries(cfg)) entries[k] = v;
  meta["config"] = entries;
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot write " + path.string());
  os << meta.dump(2) << '\n';
}

std::string run_label(const ExperimentConfig& cfg) { return cfg.method + " Q=" + std::to_string(cfg.Q); }

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  const ExperimentSetup setup = prepare_experiment(cfg);
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<RoundTrace>> traces(trials);

  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(trials));
  if (workers == 1) {
    for (std::size_t k = 0; k < trials; ++k) traces[k] = run_trial(cfg, setup, k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(trials);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < trials; k = next++) {
          try {
            traces[k] = run_trial(cfg, setup, k);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  ResultTable table = aggregate_trials(traces);
  table.label = run_label(cfg);
  table.fingerprint = config_fingerprint(cfg);
  table.seed = cfg.seed;
  if (!cfg.output.empty()) {
    const std::filesystem::path dir(cfg.output);
    std::filesystem::create_directories(dir);
    write_trace_csv(table, dir / "trace.csv");
    write_meta(cfg, setup, table, dir / "meta.json");
  }
  return table;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxis parse_sweep_axis(std::string_view axis) {
  if (axis == "Q" || axis == "q") return SweepAxis::Q;
  if (axis == "n" || axis == "N") return SweepAxis::N;
  if (axis == "method") return SweepAxis::Method;
  fail(ErrorKind::Configuration, "config error: sweep axis: expected Q | n | method, got '" + std::string(axis) + "'");
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::Domain, "slope fit needs at least two paired points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) fail(ErrorKind::Domain, "log-log fit needs positive values");
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(x.size());
  const double denom = m * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) fail(ErrorKind::Domain, "log-log fit needs distinct x values");
  return (m * sxy - sx * sy) / denom;
}

SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<std::string>& values) {
  if (values.empty()) fail(ErrorKind::Configuration, "config error: sweep: no values given");
  const char* axis_name = axis == SweepAxis::Q ? "Q" : axis == SweepAxis::N ? "n" : "method";
  SweepResult result{axis, {}, std::nullopt};
  for (const auto& value : values) {
    ExperimentConfig point = cfg;
    switch (axis) {
      case SweepAxis::Q:
        set_config_value(point, "Q", value);
        break;
      case SweepAxis::N:
        set_config_value(point, "topology.n", value);
        break;
      case SweepAxis::Method:
        set_config_value(point, "method", value);
        break;
    }
    if (!cfg.output.empty()) {
      point.output = (std::filesystem::path(cfg.output) / (std::string(axis_name) + "=" + value)).string();
    }
    ResultTable table = run_experiment(point);
    table.label = axis == SweepAxis::Method ? value : std::string(axis_name) + "=" + value;
    result.points.push_back({value, std::move(table)});
  }

  if (axis == SweepAxis::Q && result.points.size() >= 2) {
    std::vector<double> qs, errs;
    for (const auto& p : result.points) {
      qs.push_back(std::stod(p.value));
      errs.push_back(p.table.final_window_mean("grad_norm_avg"));
    }
    result.loglog_slope = loglog_slope(qs, errs);
  }

  if (!cfg.output.empty()) {
    std::filesystem::create_directories(cfg.output);
    const auto path = std::filesystem::path(cfg.output) / "summary.csv";
    std::ofstream os(path);
    if (!os) fail(ErrorKind::Io, "cannot write " + path.string());
    os << "axis,value,consensus_x,grad_norm_avg,opt_gap_mean,loglog_slope\n";
    for (const auto& p : result.points) {
      os << axis_name << ',' << p.value << ',' << format_double(p.table.final_window_mean("consensus_x")) << ','
         << format_double(p.table.final_window_mean("grad_norm_avg")) << ','
         << format_double(p.table.final_window_mean("opt_gap_mean")) << ','
         << (result.loglog_slope ? format_double(*result.loglog_slope) : std::string()) << '\n';
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::array<std::string_view, 10> kCsvColumns{
    "t",           "consensus_x",          "consensus_y", "grad_norm_avg",      "grad_norm_avg_std",
    "opt_gap_mean", "opt_gap_mean_std", "z_dev",       "lyapunov_surrogate", "d_bar_drift"};

}  // namespace

std::string trace_csv(const ResultTable& table) {
  std::string out;
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
    if (c) out += ',';
    out += kCsvColumns[c];
  }
  out += '\n';
  for (std::size_t k = 0; k < table.rows(); ++k) {
    out += std::to_string(table.t[k]);
    for (std::size_t c = 1; c < kCsvColumns.size(); ++c) {
      std::string_view col = kCsvColumns[c];
      double v = 0.0;
      if (col.size() > 4 && col.substr(col.size() - 4) == "_std") {
        v = table.stddev_of(col.substr(0, col.size() - 4))[k];
      } else {
        v = table.mean_of(col)[k];
      }
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_trace_csv(const ResultTable& table, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot write " + path.string());
  os << trace_csv(table);
}

ResultTable read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::Parse, path.string() + ":1: empty trace file");
  std::string expected;
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
    if (c) expected += ',';
    expected += kCsvColumns[c];
  }
  if (trim(line) != expected) fail(ErrorKind::Parse, path.string() + ":1: unexpected header");

  ResultTable table;
  table.label = path.parent_path().filename().string();
  if (table.label.empty()) table.label = path.stem().string();
  for (std::size_t c = 1; c < kCsvColumns.size(); ++c) {
    std::string_view col = kCsvColumns[c];
    if (col.size() > 4 && col.substr(col.size() - 4) == "_std") continue;
    table.mean[std::string(col)];
  }
  table.stddev["grad_norm_avg"];
  table.stddev["opt_gap_mean"];

  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != kCsvColumns.size()) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(kCsvColumns.size()) + " columns");
    }
    try {
      table.t.push_back(std::stol(cells[0]));
      for (std::size_t c = 1; c < kCsvColumns.size(); ++c) {
        std::string_view col = kCsvColumns[c];
        const double v = std::stod(cells[c]);
        if (col.size() > 4 && col.substr(col.size() - 4) == "_std") {
          table.stddev[std::string(col.substr(0, col.size() - 4))].push_back(v);
        } else {
          table.mean[std::string(col)].push_back(v);
        }
      }
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Plotting

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_plot_svg(const std::vector<ResultTable>& tables, std::string_view metric) {
  if (tables.empty()) fail(ErrorKind::Domain, "nothing to plot");
  for (const auto& t : tables) {
    if (!t.has_metric(metric)) fail(ErrorKind::UnavailableMetric, "unknown metric '" + std::string(metric) + "'");
  }

  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -t_min;
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -y_min;
  for (const auto& table : tables) {
    const auto& mean = table.mean_of(metric);
    const auto& sd = table.stddev_of(metric);
    for (std::size_t k = 0; k < table.rows(); ++k) {
      t_min = std::min(t_min, static_cast<double>(table.t[k]));
      t_max = std::max(t_max, static_cast<double>(table.t[k]));
      const double s = k < sd.size() && std::isfinite(sd[k]) ? sd[k] : 0.0;
      for (double v : {mean[k], mean[k] - s, mean[k] + s}) {
        if (std::isfinite(v) && v > 0.0) {
          y_min = std::min(y_min, v);
          y_max = std::max(y_max, v);
        }
      }
    }
  }
  if (!std::isfinite(y_min)) fail(ErrorKind::Domain, "metric '" + std::string(metric) + "' has no positive values");
  if (!(t_max > t_min)) t_max = t_min + 1.0;
  double lo = std::floor(std::log10(y_min));
  double hi = std::ceil(std::log10(y_max));
  if (!(hi > lo)) hi = lo + 1.0;

  constexpr double kW = 800, kH = 500, kLeft = 80, kRight = 180, kTop = 30, kBottom = 50;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  auto px = [&](double t) { return kLeft + (t - t_min) / (t_max - t_min) * pw; };
  auto py = [&](double v) {
    const double l = std::log10(std::clamp(v, std::pow(10.0, lo), std::pow(10.0, hi)));
    return kTop + (hi - l) / (hi - lo) * ph;
  };
  static constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                       "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << ' ' << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = lo; d <= hi + 0.5; d += 1.0) {
    const double y = py(std::pow(10.0, d));
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(kLeft + pw) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">1e" << static_cast<int>(d) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double t = t_min + (t_max - t_min) * k / 4.0;
    svg << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(kTop + ph + 18) << "\" font-size=\"11\" text-anchor=\"middle\">"
        << static_cast<long>(std::llround(t)) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kH - 10)
      << "\" font-size=\"12\" text-anchor=\"middle\">round t</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(kTop + ph / 2) << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt(kTop + ph / 2) << ")\">" << escape_xml(metric) << "</text>\n";

  for (std::size_t idx = 0; idx < tables.size(); ++idx) {
    const auto& table = tables[idx];
    const char* colour = kPalette[idx % kPalette.size()];
    const auto& mean = table.mean_of(metric);
    const auto& sd = table.stddev_of(metric);
    if (!sd.empty()) {
      std::string upper, lower;
      for (std::size_t k = 0; k < table.rows(); ++k) {
        if (!std::isfinite(mean[k]) || !std::isfinite(sd[k])) continue;
        const double t = static_cast<double>(table.t[k]);
        upper += fmt(px(t)) + "," + fmt(py(mean[k] + sd[k])) + " ";
      }
      for (std::size_t k = table.rows(); k-- > 0;) {
        if (!std::isfinite(mean[k]) || !std::isfinite(sd[k])) continue;
        const double t = static_cast<double>(table.t[k]);
        lower += fmt(px(t)) + "," + fmt(py(mean[k] - sd[k])) + " ";
      }
      if (!upper.empty()) {
        svg << "<polygon points=\"" << upper << lower << "\" fill=\"" << colour
            << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      }
    }
    std::string points;
    for (std::size_t k = 0; k < table.rows(); ++k) {
      if (!std::isfinite(mean[k])) continue;
      points += fmt(px(static_cast<double>(table.t[k]))) + "," + fmt(py(mean[k])) + " ";
    }
    if (!points.empty()) points.pop_back();
    svg << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(idx);
    svg << "<line x1=\"" << fmt(kLeft + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(kLeft + pw + 32)
        << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(kLeft + pw + 38) << "\" y=\"" << fmt(ly + 4) << "\" font-size=\"11\">"
        << escape_xml(table.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::vector<ResultTable>& tables, std::string_view metric, const std::filesystem::path& path) {
  const std::string svg = render_plot_svg(tables, metric);
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot write " + path.string());
  os << svg;
}

}  // namespace lmt
