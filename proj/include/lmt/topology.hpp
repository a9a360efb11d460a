#pragma once

#include "lmt/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lmt {

/// Tolerances used when validating a mixing matrix.
inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kPsdTol = 1e-12;
/// lambda at or above this is treated as a disconnected graph.
inline constexpr double kConnectivityTol = 1e-10;

struct SpectralInfo {
  double lambda = 0.0;
  double spectral_gap = 1.0;
  std::vector<std::string> warnings;
};

/// Symmetric, doubly stochastic, nonnegative, positive semidefinite weight matrix of a
/// connected graph, together with lambda = ||W - 11^T/n||_2.
///
/// Instances only exist in a validated state; construct through the builders or
/// from_weights().
class MixingMatrix {
 public:
  /// Validates every invariant and rejects disconnected graphs.
  static MixingMatrix from_weights(Mat weights);

  int n() const { return static_cast<int>(weights_.rows()); }
  const Mat& weights() const { return weights_; }
  double lambda() const { return lambda_; }
  double spectral_gap() const { return 1.0 - lambda_; }

 private:
  MixingMatrix(Mat weights, double lambda) : weights_(std::move(weights)), lambda_(lambda) {}

  Mat weights_;
  double lambda_;
};

/// Lazy ring W = (I + W0)/2, W0 giving weight 1/3 to self and both neighbours.
MixingMatrix build_ring_mixing(int n);

/// W = 11^T/n.
MixingMatrix build_complete_mixing(int n);

/// Checks symmetry, row sums, nonnegativity and PSD (throws Validation naming the
/// violated invariant), then computes lambda by symmetric eigendecomposition.
/// A disconnected graph is reported through `warnings`, not thrown.
SpectralInfo spectral_quantities(const Mat& weights);

/// Loopless Chebyshev acceleration constants.
struct LcaParams {
  double eta_w = 0.5;
  double rho_w = 0.70710678118654752;
  int c0 = 14;
};

LcaParams lca_params(double lambda);

struct AugmentedPair {
  Mat top;
  Mat bottom;
};

/// One application of the augmented operator [[(1+eta_w)W, -eta_w I], [I, 0]].
AugmentedPair apply_augmented(const MixingMatrix& w, double eta_w, const AugmentedPair& pair);

/// Dense CSV, one matrix row per line, full-precision decimals.
void write_mixing_csv(const std::filesystem::path& path, const Mat& weights);
MixingMatrix read_mixing_csv(const std::filesystem::path& path);

}  // namespace lmt
