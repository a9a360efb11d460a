#include "lmt/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace lmt {

// ---------------------------------------------------------------------------
// GradientOracle conveniences

Vec GradientOracle::full_gradient(int agent, const Eigen::Ref<const Vec>& x) const {
  Vec g(dim());
  gradient_into(agent, x, g);
  return g;
}

Vec GradientOracle::stochastic_gradient(int agent, const Eigen::Ref<const Vec>& x, CounterRng& rng) const {
  Vec g(dim());
  stochastic_gradient_into(agent, x, rng, g);
  return g;
}

double GradientOracle::global_value(const Eigen::Ref<const Vec>& x) const {
  double sum = 0.0;
  for (int i = 0; i < n_agents(); ++i) sum += value(i, x);
  return sum / n_agents();
}

Vec GradientOracle::global_gradient(const Eigen::Ref<const Vec>& x) const {
  Vec sum = Vec::Zero(dim());
  Vec g(dim());
  for (int i = 0; i < n_agents(); ++i) {
    gradient_into(i, x, g);
    sum += g;
  }
  return sum / n_agents();
}

Mat GradientOracle::stacked_gradient(const Mat& x) const {
  Mat out(x.rows(), x.cols());
  Vec g(dim());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    gradient_into(static_cast<int>(i), x.row(i).transpose(), g);
    out.row(i) = g.transpose();
  }
  return out;
}

Vec GradientOracle::global_values(const Mat& x) const {
  Vec out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = global_value(x.row(i).transpose());
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

PartitionedDataset partition_heterogeneous(const Dataset& raw, int n) {
  const std::size_t m = raw.size();
  if (m == 0) fail(ErrorKind::Configuration, "cannot partition an empty dataset");
  if (n < 1 || static_cast<std::size_t>(n) > m) {
    fail(ErrorKind::Configuration, "cannot split " + std::to_string(m) + " samples among " + std::to_string(n) +
                                       " agents");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw.labels[a] < raw.labels[b]; });

  PartitionedDataset out;
  const std::size_t base = m / static_cast<std::size_t>(n);
  const std::size_t extra = m % static_cast<std::size_t>(n);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const std::size_t count = base + (i < extra ? 1 : 0);
    Dataset shard;
    shard.features.resize(static_cast<Eigen::Index>(count), raw.features.cols());
    shard.labels.resize(static_cast<Eigen::Index>(count));
    std::vector<std::size_t> rows;
    rows.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t src = order[cursor++];
      shard.features.row(static_cast<Eigen::Index>(k)) = raw.features.row(static_cast<Eigen::Index>(src));
      shard.labels(static_cast<Eigen::Index>(k)) = raw.labels(static_cast<Eigen::Index>(src));
      rows.push_back(src);
    }
    out.shards.push_back(std::move(shard));
    out.source_rows.push_back(std::move(rows));
  }
  return out;
}

namespace {

struct RawRecord {
  std::vector<std::pair<int, double>> entries;  // 0-based column, value
  double label = 0.0;
};

[[noreturn]] void parse_error(const std::filesystem::path& path, int lineno, const std::string& what) {
  fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": " + what);
}

double parse_number(const std::string& token, const std::filesystem::path& path, int lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    parse_error(path, lineno, "malformed number '" + token + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Dataset assemble(const std::vector<RawRecord>& records, int dim, const std::filesystem::path& path) {
  if (records.empty()) fail(ErrorKind::Parse, path.string() + ": no samples");
  std::map<double, int> distinct;
  for (const auto& r : records) distinct.emplace(r.label, 0);
  if (distinct.size() != 2) {
    fail(ErrorKind::UnsupportedDataset, path.string() + ": expected exactly 2 label values, found " +
                                            std::to_string(distinct.size()));
  }
  distinct.begin()->second = -1;
  std::next(distinct.begin())->second = 1;

  Dataset d;
  d.features = Mat::Zero(static_cast<Eigen::Index>(records.size()), dim);
  d.labels.resize(static_cast<Eigen::Index>(records.size()));
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    for (const auto& [col, v] : records[k].entries) d.features(row, col) = v;
    d.labels(row) = distinct.at(records[k].label);
  }
  return d;
}

}  // namespace

Dataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<RawRecord> records;
  int dim = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    RawRecord rec;
    rec.label = parse_number(token, path, lineno);
    while (ss >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) parse_error(path, lineno, "expected index:value, got '" + token + "'");
      int index = 0;
      try {
        std::size_t used = 0;
        index = std::stoi(token.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        parse_error(path, lineno, "malformed feature index in '" + token + "'");
      }
      if (index < 1) parse_error(path, lineno, "feature indices are 1-based, got " + std::to_string(index));
      rec.entries.emplace_back(index - 1, parse_number(token.substr(colon + 1), path, lineno));
      dim = std::max(dim, index);
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorKind::Parse, path.string() + ":1: empty dataset");
  return assemble(records, dim, path);
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<RawRecord> records;
  int dim = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(parse_number(trim(cell), path, lineno));
    if (cells.size() < 2) parse_error(path, lineno, "need at least one feature and a label");
    const int p = static_cast<int>(cells.size()) - 1;
    if (dim >= 0 && p != dim) {
      parse_error(path, lineno, "expected " + std::to_string(dim) + " features, got " + std::to_string(p));
    }
    dim = p;
    RawRecord rec;
    rec.label = cells.back();
    for (int q = 0; q < p; ++q) rec.entries.emplace_back(q, cells[static_cast<std::size_t>(q)]);
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorKind::Parse, path.string() + ":1: empty dataset");
  return assemble(records, dim, path);
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return load_csv(path);
  return load_libsvm(path);
}

Dataset make_synthetic_two_class(std::size_t samples, int dim, std::uint64_t seed, double separation) {
  if (samples < 2 || dim < 1) fail(ErrorKind::Configuration, "synthetic dataset needs >= 2 samples and dim >= 1");
  CounterRng rng(splitmix64(seed ^ 0x5eedda7aULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec direction(dim);
  for (int q = 0; q < dim; ++q) direction(q) = normal(rng);
  direction *= separation / direction.norm();

  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(samples), dim);
  d.labels.resize(static_cast<Eigen::Index>(samples));
  for (std::size_t k = 0; k < samples; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const double label = (k % 2 == 0) ? 1.0 : -1.0;
    Vec u(dim);
    for (int q = 0; q < dim; ++q) u(q) = normal(rng) / std::sqrt(static_cast<double>(dim));
    u += label * direction;
    d.features.row(row) = u.transpose() / u.norm();
    d.labels(row) = label;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Logistic objectives

namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

LogisticOracle::LogisticOracle(PartitionedDataset data, Regularizer reg, double strength, int batch,
                               Sampling sampling)
    : data_(std::move(data)), reg_(reg), strength_(strength), batch_(batch), sampling_(sampling) {
  if (!(strength_ >= 0.0)) fail(ErrorKind::Parameter, "regularizer strength must be >= 0");
  if (data_.shards.empty()) fail(ErrorKind::Configuration, "no agents in partitioned dataset");
  if (batch_ < 1) fail(ErrorKind::Configuration, "batch must be positive");
  dim_ = data_.shards.front().dim();
  double data_smoothness = 0.0;
  double second_moment = 0.0;
  for (std::size_t i = 0; i < data_.shards.size(); ++i) {
    const Dataset& s = data_.shards[i];
    if (s.size() == 0) fail(ErrorKind::Configuration, "agent " + std::to_string(i) + " has an empty shard");
    if (s.dim() != dim_) fail(ErrorKind::Configuration, "shards disagree on feature dimension");
    if (static_cast<std::size_t>(batch_) > s.size()) {
      fail(ErrorKind::Configuration, "batch " + std::to_string(batch_) + " exceeds shard size " +
                                         std::to_string(s.size()) + " of agent " + std::to_string(i));
    }
    const double mean_sq = s.features.rowwise().squaredNorm().mean();
    data_smoothness = std::max(data_smoothness, mean_sq / 4.0);
    second_moment = std::max(second_moment, mean_sq);
  }
  smoothness_ = data_smoothness + strength_;
  sigma_ = std::sqrt(second_moment / batch_);
}

std::optional<double> LogisticOracle::pl_modulus() const {
  if (reg_ == Regularizer::L2 && strength_ > 0.0) return strength_;
  return std::nullopt;
}

double LogisticOracle::regularizer_value(const Eigen::Ref<const Vec>& x) const {
  if (reg_ == Regularizer::L2) return 0.5 * strength_ * x.squaredNorm();
  const auto sq = x.array().square();
  return 0.5 * strength_ * (sq / (1.0 + sq)).sum();
}

void LogisticOracle::add_regularizer_gradient(const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const {
  if (reg_ == Regularizer::L2) {
    out += strength_ * x;
    return;
  }
  const auto denom = (1.0 + x.array().square()).square();
  out.array() += strength_ * x.array() / denom;
}

double LogisticOracle::value(int agent, const Eigen::Ref<const Vec>& x) const {
  const Dataset& s = data_.shards.at(static_cast<std::size_t>(agent));
  const Vec margins = (s.features * x).cwiseProduct(s.labels);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < margins.size(); ++j) loss += softplus(-margins(j));
  return loss / static_cast<double>(s.size()) + regularizer_value(x);
}

Vec LogisticOracle::global_values(const Mat& x) const {
  Vec loss = Vec::Zero(x.rows());
  for (const Dataset& s : data_.shards) {
    // margins(j, k) = v_j u_j^T x_k
    Eigen::MatrixXd margins = s.features * x.transpose();
    margins = s.labels.asDiagonal() * margins;
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < margins.rows(); ++j) sum += softplus(-margins(j, k));
      loss(k) += sum / static_cast<double>(s.size());
    }
  }
  loss /= static_cast<double>(data_.shards.size());
  for (Eigen::Index k = 0; k < x.rows(); ++k) loss(k) += regularizer_value(x.row(k).transpose());
  return loss;
}

void LogisticOracle::gradient_into(int agent, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const {
  const Dataset& s = data_.shards.at(static_cast<std::size_t>(agent));
  const Vec margins = (s.features * x).cwiseProduct(s.labels);
  Vec weights(margins.size());
  for (Eigen::Index j = 0; j < margins.size(); ++j) weights(j) = -s.labels(j) * sigmoid(-margins(j));
  out.noalias() = s.features.transpose() * weights;
  out /= static_cast<double>(s.size());
  add_regularizer_gradient(x, out);
}

void LogisticOracle::stochastic_gradient_into(int agent, const Eigen::Ref<const Vec>& x, CounterRng& rng,
                                              Eigen::Ref<Vec> out) const {
  const Dataset& s = data_.shards.at(static_cast<std::size_t>(agent));
  const std::size_t m = s.size();
  std::vector<std::size_t> picks(static_cast<std::size_t>(batch_));
  if (sampling_ == Sampling::WithReplacement) {
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    for (auto& k : picks) k = pick(rng);
  } else {
    // Partial Fisher-Yates, then summed in index order.
    std::vector<std::size_t> pool(m);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t k = 0; k < picks.size(); ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, m - 1);
      std::swap(pool[k], pool[pick(rng)]);
      picks[k] = pool[k];
    }
    std::sort(picks.begin(), picks.end());
  }
  out.setZero();
  for (const std::size_t k : picks) {
    const auto row = static_cast<Eigen::Index>(k);
    const double v = s.labels(row);
    const double margin = v * s.features.row(row).dot(x);
    out += (-v * sigmoid(-margin)) * s.features.row(row).transpose();
  }
  out /= static_cast<double>(batch_);
  add_regularizer_gradient(x, out);
}

std::unique_ptr<LogisticOracle> logistic_l2_oracle(PartitionedDataset data, double rho, int batch,
                                                   Sampling sampling) {
  return std::make_unique<LogisticOracle>(std::move(data), Regularizer::L2, rho, batch, sampling);
}

std::unique_ptr<LogisticOracle> logistic_nonconvex_oracle(PartitionedDataset data, double omega, int batch,
                                                          Sampling sampling) {
  return std::make_unique<LogisticOracle>(std::move(data), Regularizer::Nonconvex, omega, batch, sampling);
}

// ---------------------------------------------------------------------------
// Quadratics

QuadraticOracle::QuadraticOracle(std::vector<Eigen::MatrixXd> hessians, std::vector<Vec> centres, double sigma,
                                 double mu, double smoothness)
    : hessians_(std::move(hessians)), centres_(std::move(centres)), sigma_(sigma), mu_(mu), smoothness_(smoothness) {
  if (hessians_.empty() || hessians_.size() != centres_.size()) {
    fail(ErrorKind::Configuration, "quadratic oracle needs one (A_i, b_i) pair per agent");
  }
  if (!(sigma_ >= 0.0)) fail(ErrorKind::Parameter, "sigma must be >= 0");
  const auto p = centres_.front().size();
  Eigen::MatrixXd sum_a = Eigen::MatrixXd::Zero(p, p);
  Vec sum_ab = Vec::Zero(p);
  for (std::size_t i = 0; i < hessians_.size(); ++i) {
    if (hessians_[i].rows() != p || hessians_[i].cols() != p || centres_[i].size() != p) {
      fail(ErrorKind::Dimension, "quadratic agent " + std::to_string(i) + " has inconsistent dimensions");
    }
    sum_a += hessians_[i];
    sum_ab += hessians_[i] * centres_[i];
  }
  minimizer_ = sum_a.ldlt().solve(sum_ab);
  f_star_ = global_value(minimizer_);
}

double QuadraticOracle::value(int agent, const Eigen::Ref<const Vec>& x) const {
  const auto i = static_cast<std::size_t>(agent);
  const Vec d = x - centres_.at(i);
  return 0.5 * d.dot(hessians_[i] * d);
}

void QuadraticOracle::gradient_into(int agent, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const {
  const auto i = static_cast<std::size_t>(agent);
  out.noalias() = hessians_.at(i) * (x - centres_[i]);
}

void QuadraticOracle::stochastic_gradient_into(int agent, const Eigen::Ref<const Vec>& x, CounterRng& rng,
                                               Eigen::Ref<Vec> out) const {
  gradient_into(agent, x, out);
  if (sigma_ == 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma_ / std::sqrt(static_cast<double>(out.size())));
  for (Eigen::Index q = 0; q < out.size(); ++q) out(q) += normal(rng);
}

std::unique_ptr<QuadraticOracle> quadratic_pl_oracle(int n, int p, double mu_min, double smoothness, double sigma,
                                                     std::uint64_t seed) {
  if (n < 1 || p < 1) fail(ErrorKind::Parameter, "quadratic oracle needs n >= 1 and p >= 1");
  if (!(mu_min > 0.0) || !(mu_min <= smoothness)) {
    fail(ErrorKind::Parameter, "quadratic oracle needs 0 < mu_min <= L");
  }
  if (!(sigma >= 0.0)) fail(ErrorKind::Parameter, "sigma must be >= 0");
  CounterRng rng(splitmix64(seed ^ 0x9a0dULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> spectrum(mu_min, smoothness);
  std::vector<Eigen::MatrixXd> hessians;
  std::vector<Vec> centres;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd g(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) g(r, c) = normal(rng);
    const Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Vec d(p);
    for (int q = 0; q < p; ++q) d(q) = spectrum(rng);
    Eigen::MatrixXd a = u * d.asDiagonal() * u.transpose();
    a = 0.5 * (a + a.transpose());
    Vec b(p);
    for (int q = 0; q < p; ++q) b(q) = normal(rng);
    hessians.push_back(std::move(a));
    centres.push_back(std::move(b));
  }
  return std::make_unique<QuadraticOracle>(std::move(hessians), std::move(centres), sigma, mu_min, smoothness);
}

// ---------------------------------------------------------------------------

CentralizedSolution solve_centralized(const GradientOracle& oracle, double tol, int max_iter) {
  const auto lip = oracle.smoothness();
  if (!lip || !(*lip > 0.0)) fail(ErrorKind::UnavailableMetric, "centralized solve needs a smoothness constant");
  const double step = 1.0 / *lip;
  CentralizedSolution sol;
  sol.x = Vec::Zero(oracle.dim());
  Vec g = oracle.global_gradient(sol.x);
  int it = 0;
  while (g.norm() > tol && it < max_iter) {
    sol.x -= step * g;
    g = oracle.global_gradient(sol.x);
    ++it;
  }
  sol.iterations = it;
  sol.grad_norm = g.norm();
  sol.value = oracle.global_value(sol.x);
  return sol;
}

}  // namespace lmt
