#pragma once

#include "lmt/common.hpp"
#include "lmt/lmt_core.hpp"
#include "lmt/objectives.hpp"
#include "lmt/topology.hpp"

#include <optional>
#include <span>

namespace lmt {

/// Metrics recorded at the start of round t (x_t) together with the tracking
/// variable produced during that round. Quantities a method does not define are NaN.
struct RoundTrace {
  long t = 0;
  double consensus_x = 0.0;    // ||Pi X_t||^2
  double consensus_y = 0.0;    // ||Pi Y_t||^2
  double grad_norm_avg = 0.0;  // ||grad f(x̄_t)||^2
  double opt_gap_mean = 0.0;   // (1/n) sum_i f(x_{i,t}) - f*
  double z_dev = 0.0;          // ||Z_t - grad F(1 x̄_t^T)||^2
  double lyapunov_surrogate = 0.0;
  double d_bar_drift = 0.0;    // ||d̄_{t+1} - d̄_t + eta_hat ḡ_t||
  Vec d_bar;
};

/// ||M - 1 mean(M)||_F^2.
double consensus_error(const Mat& m);

/// d̄_0 = x̄_0 and d̄_t = (x̄_t - beta x̄_{t-1}) / (1 - beta) for t >= 1.
Vec d_bar_sequence(const Vec& x_bar_t, const Vec& x_bar_prev, double beta, long t);

/// (1/n) sum_i f(x_i) - f*. Throws UnavailableMetric without f*.
double optimality_gap_mean(const GradientOracle& oracle, const Mat& x);

/// ||Z - grad F(1 x̄^T)||^2.
double momentum_deviation(const GradientOracle& oracle, const Mat& z, const Vec& x_bar);

struct LyapunovTerms {
  double f_d_bar = 0.0;
  std::optional<double> f_star;
  Vec z_bar;
  double consensus_x = 0.0;  // stands in for R^x_t
  double consensus_y = 0.0;  // stands in for R^y_t
  double z_dev = 0.0;
  int n = 1;
};

/// Single-trajectory surrogate of the Lyapunov function
///   f(d̄) - f* + 4 eta^3 L^2/(1-beta)^3 ||z̄||^2 + 11 eta L^2/(n(1-rho)) ||Pi x||^2
///   + 21 eta eta_a^2 Q^2 L^2/(n(1-rho)) ||Pi y||^2 + 6(1+63 c0) eta eta_a^2 Q^2 L^2/(n(1-beta)) z_dev
/// with eta = eta_hat and rho = rho_w. Throws UnavailableMetric without f*.
double lyapunov_surrogate(const LyapunovTerms& terms, const HyperParams& hp, double smoothness,
                          const LcaParams& lca);

/// (1/T) sum_t grad_norm_avg.
double running_stationarity(std::span<const RoundTrace> traces);

/// Scaled residuals of the exact per-round identities of the averaged iterates.
struct IdentityResiduals {
  double tracking = 0.0;       // ȳ_t vs z̄_{t+1}, scaled by 1 + ||Z_{t+1}||
  double tracking_l = 0.0;     // ȳ_t vs ȳ_t^(l)
  double averaged_step = 0.0;  // x̄_{t+1} vs x̄_t - eta_hat ȳ_t, scaled by 1 + ||X_t||
  double correction_mean = 0.0;  // ||mean(C_{t+1})||
  double dbar_recursion = 0.0;   // d̄_{t+1} vs d̄_t - eta_hat ḡ_t, relative
  double dbar_identity = 0.0;    // d̄_t - x̄_t vs -eta_hat beta/(1-beta) z̄_t, relative
};

/// `x_bar_prev` is x̄_{t-1} (ignored at t = 0).
IdentityResiduals identity_residuals(const LmtState& before, const LmtState& after, const RoundOutputs& out,
                                     const HyperParams& hp, const Vec& x_bar_prev);

}  // namespace lmt
