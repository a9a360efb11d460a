#pragma once

#include "lmt/common.hpp"
#include "lmt/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace lmt {

/// Per-agent objectives f_i with deterministic and stochastic first-order access.
///
/// Implementations are immutable once handed to a solver and may be evaluated
/// concurrently from several threads as long as each caller owns its generator.
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;

  virtual int n_agents() const = 0;
  virtual int dim() const = 0;

  virtual double value(int agent, const Eigen::Ref<const Vec>& x) const = 0;
  virtual void gradient_into(int agent, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const = 0;
  /// Unbiased estimate of the agent gradient whose variance is at most noise_bound()^2.
  virtual void stochastic_gradient_into(int agent, const Eigen::Ref<const Vec>& x, CounterRng& rng,
                                        Eigen::Ref<Vec> out) const = 0;

  /// sigma in E||g - grad f_i||^2 <= sigma^2.
  virtual double noise_bound() const = 0;
  virtual std::optional<double> smoothness() const { return std::nullopt; }
  virtual std::optional<double> f_star() const { return std::nullopt; }
  /// PL modulus of the global objective, when known.
  virtual std::optional<double> pl_modulus() const { return std::nullopt; }

  Vec full_gradient(int agent, const Eigen::Ref<const Vec>& x) const;
  Vec stochastic_gradient(int agent, const Eigen::Ref<const Vec>& x, CounterRng& rng) const;
  /// f(x) = (1/n) sum_i f_i(x).
  double global_value(const Eigen::Ref<const Vec>& x) const;
  Vec global_gradient(const Eigen::Ref<const Vec>& x) const;
  /// Row i holds grad f_i(X.row(i)).
  Mat stacked_gradient(const Mat& x) const;
  /// Entry i holds the global objective f at X.row(i).
  virtual Vec global_values(const Mat& x) const;
};

/// Two-class dataset with labels already mapped to {-1, +1}.
struct Dataset {
  Mat features;  // one sample per row
  Vec labels;

  std::size_t size() const { return static_cast<std::size_t>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

struct PartitionedDataset {
  std::vector<Dataset> shards;
  /// Row indices into the source dataset, per shard.
  std::vector<std::vector<std::size_t>> source_rows;

  int n_agents() const { return static_cast<int>(shards.size()); }
};

/// Stable sort by label (-1 before +1), then n contiguous shards whose sizes differ
/// by at most one (larger shards first).
PartitionedDataset partition_heterogeneous(const Dataset& raw, int n);

/// LIBSVM text: "label idx:val ...", 1-based indices, missing indices are zero.
Dataset load_libsvm(const std::filesystem::path& path);
/// Headerless CSV "f1,...,fp,label".
Dataset load_csv(const std::filesystem::path& path);
/// Dispatches on extension: .csv -> CSV, anything else -> LIBSVM.
Dataset load_dataset(const std::filesystem::path& path);

/// Gaussian class-conditional features with unit-norm rows, labels balanced.
Dataset make_synthetic_two_class(std::size_t samples, int dim, std::uint64_t seed, double separation = 1.0);

enum class Sampling {
  WithReplacement,
  /// Distinct indices per minibatch; batch == |S_i| reproduces the full gradient.
  WithoutReplacement,
};

enum class Regularizer {
  L2,         // (rho/2)||x||^2
  Nonconvex,  // (omega/2) sum_q x_q^2 / (1 + x_q^2)
};

/// Logistic loss averaged over the agent's shard plus a regularizer.
class LogisticOracle final : public GradientOracle {
 public:
  LogisticOracle(PartitionedDataset data, Regularizer reg, double strength, int batch,
                 Sampling sampling = Sampling::WithReplacement);

  int n_agents() const override { return data_.n_agents(); }
  int dim() const override { return dim_; }
  double value(int agent, const Eigen::Ref<const Vec>& x) const override;
  void gradient_into(int agent, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const override;
  void stochastic_gradient_into(int agent, const Eigen::Ref<const Vec>& x, CounterRng& rng,
                                Eigen::Ref<Vec> out) const override;
  double noise_bound() const override { return sigma_; }
  std::optional<double> smoothness() const override { return smoothness_; }
  std::optional<double> f_star() const override { return f_star_; }
  std::optional<double> pl_modulus() const override;
  Vec global_values(const Mat& x) const override;

  /// Caches the centralized optimum; call before sharing the oracle.
  void set_f_star(double f_star) { f_star_ = f_star; }
  const PartitionedDataset& data() const { return data_; }
  int batch() const { return batch_; }

 private:
  void add_regularizer_gradient(const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const;
  double regularizer_value(const Eigen::Ref<const Vec>& x) const;

  PartitionedDataset data_;
  Regularizer reg_;
  double strength_;
  int batch_;
  Sampling sampling_;
  int dim_ = 0;
  double smoothness_ = 0.0;
  double sigma_ = 0.0;
  std::optional<double> f_star_;
};

std::unique_ptr<LogisticOracle> logistic_l2_oracle(PartitionedDataset data, double rho, int batch,
                                                   Sampling sampling = Sampling::WithReplacement);
std::unique_ptr<LogisticOracle> logistic_nonconvex_oracle(PartitionedDataset data, double omega, int batch,
                                                          Sampling sampling = Sampling::WithReplacement);

/// f_i(x) = 1/2 (x - b_i)^T A_i (x - b_i) with additive isotropic Gaussian gradient noise
/// of total variance sigma^2.
class QuadraticOracle final : public GradientOracle {
 public:
  QuadraticOracle(std::vector<Eigen::MatrixXd> hessians, std::vector<Vec> centres, double sigma, double mu,
                  double smoothness);

  int n_agents() const override { return static_cast<int>(hessians_.size()); }
  int dim() const override { return static_cast<int>(centres_.front().size()); }
  double value(int agent, const Eigen::Ref<const Vec>& x) const override;
  void gradient_into(int agent, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const override;
  void stochastic_gradient_into(int agent, const Eigen::Ref<const Vec>& x, CounterRng& rng,
                                Eigen::Ref<Vec> out) const override;
  double noise_bound() const override { return sigma_; }
  std::optional<double> smoothness() const override { return smoothness_; }
  std::optional<double> f_star() const override { return f_star_; }
  std::optional<double> pl_modulus() const override { return mu_; }

  const Vec& minimizer() const { return minimizer_; }
  const Eigen::MatrixXd& hessian(int agent) const { return hessians_[static_cast<std::size_t>(agent)]; }
  const Vec& centre(int agent) const { return centres_[static_cast<std::size_t>(agent)]; }

 private:
  std::vector<Eigen::MatrixXd> hessians_;
  std::vector<Vec> centres_;
  double sigma_;
  double mu_;
  double smoothness_;
  Vec minimizer_;
  double f_star_ = 0.0;
};

/// Random heterogeneous quadratics: each A_i = U_i diag(d_i) U_i^T with a random
/// rotation U_i and eigenvalues d_i drawn from [mu_min, L], so the average Hessian
/// has its spectrum inside [mu_min, L].
std::unique_ptr<QuadraticOracle> quadratic_pl_oracle(int n, int p, double mu_min, double smoothness, double sigma,
                                                     std::uint64_t seed);

struct CentralizedSolution {
  Vec x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Full-gradient descent on the global objective (step 1/L) until ||grad f|| <= tol.
CentralizedSolution solve_centralized(const GradientOracle& oracle, double tol = 1e-10, int max_iter = 200000);

}  // namespace lmt
