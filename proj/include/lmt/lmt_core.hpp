#pragma once

#include "lmt/common.hpp"
#include "lmt/objectives.hpp"
#include "lmt/rng.hpp"
#include "lmt/topology.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lmt {

struct HyperParams {
  int Q = 1;             // local updates per communication round
  double eta_a = 0.0;    // local step size
  double eta_s = 0.0;    // outer step size
  double beta = 0.0;     // momentum, in [0, 1)
  double eta_w = 0.0;    // Chebyshev acceleration parameter

  /// Composite step governing the averaged iterate.
  double eta_hat() const { return eta_a * eta_s * static_cast<double>(Q); }
};

/// Throws Parameter if Q < 1, a step is nonpositive, beta is outside [0, 1) or
/// eta_w is outside [0, 1).
void validate(const HyperParams& hp);

/// Messages for configurations that are legal but outside the analysed regime
/// (currently: beta below rho_w).
std::vector<std::string> theory_warnings(const HyperParams& hp, const LcaParams& lca);

/// Stacked iterates of all agents at the start of a communication round.
struct LmtState {
  Mat X;       // x_t
  Mat X_l;     // memory iterate x_t^(l)
  Mat Z;       // momentum z_t
  Mat C;       // correction c_t
  Mat C_prev;  // c_{t-1}
  long t = 0;
};

struct RoundOutputs {
  Mat Y;          // tracking variable y_t
  Mat Y_l;        // y_t^(l)
  Mat R;          // averaged local gradients r_t
  Mat G_sum_avg;  // (1/Q) sum_l g_t^l, kept separately from R for diagnostics
  std::optional<std::vector<Mat>> X_locals;  // x_t^l for l = 0..Q-1 when requested
};

struct LocalPhase {
  Mat X_Q;
  Mat R;
  Mat G_sum_avg;
  std::optional<std::vector<Mat>> X_locals;
};

struct Tracking {
  Mat Y;
  Mat Y_l;
  Mat C_next;
};

struct Consensus {
  Mat X_next;
  Mat X_l_next;
};

struct RoundResult {
  LmtState state;
  RoundOutputs outputs;
};

/// X_l = X0, every other variable zero. Rejects non-finite input.
LmtState init_state(const Mat& x0);

/// Q corrected stochastic-gradient steps per agent starting from state.X, then
/// R = (X - X_Q)/(eta_a Q) - C. Stream key for agent i, step l is (i, state.t, l).
LocalPhase local_update_phase(const LmtState& state, const GradientOracle& oracle, const HyperParams& hp,
                              const StreamFactory& streams, bool record_locals = false);

Mat momentum_update(const Mat& z, const Mat& r, double beta);

/// Y = Z_next + C, Y_l = Z_next + C_prev, C_next = C - Y + (1+eta_w) W Y - eta_w Y_l.
Tracking tracking_and_correction(const LmtState& state, const Mat& z_next, const MixingMatrix& w, double eta_w);

/// X_next = (1+eta_w) W (X - eta_hat Y) - eta_w (X_l - eta_hat Y),  X_l_next = X - eta_hat Y.
Consensus accelerated_consensus(const LmtState& state, const Mat& y, const MixingMatrix& w, const HyperParams& hp);

/// One communication round of Local Momentum Tracking.
RoundResult lmt_round(const LmtState& state, const GradientOracle& oracle, const MixingMatrix& w,
                      const HyperParams& hp, const StreamFactory& streams, bool record_locals = false);

/// Negative control: momentum refreshed at every local step,
///   z^{l+1} = beta z^l + (1-beta) g^l,  x^{l+1} = x^l - eta_a (z^{l+1} + c),
/// with z^0 carried over from the previous round (state.Z) and y tracking the
/// round average of z^1..z^Q. Communication is identical to lmt_round.
RoundResult naive_local_momentum_round(const LmtState& state, const GradientOracle& oracle, const MixingMatrix& w,
                                       const HyperParams& hp, const StreamFactory& streams);

struct Theorem1Schedule {
  HyperParams params;  // eta_w left at 0; the caller supplies it from lca_params()
  /// eta_s implied by the published (eta_hat, eta_a) pair.
  double eta_s_bound = 0.0;  // (1 - beta)/sqrt(6 c0)
  bool eta_s_within_bound = true;
};

/// Step sizes of the nonconvex rate: eta_hat and eta_a as published, eta_s = eta_hat/(eta_a Q).
Theorem1Schedule theorem1_stepsizes(double smoothness, double sigma, int n, int Q, long T, double delta_f,
                                    double beta);

/// PL-regime schedule: eta_a = 1/(Q mu T), eta_s = (1 - rho_w)/sqrt(15 c0), beta = rho_w.
HyperParams theorem2_stepsizes(double mu, int Q, long T, double lambda);

/// eta_a = 0.25/Q, eta_s = 0.1, beta = rho_w.
HyperParams figure1_stepsizes(int Q, double lambda);

/// ceil(sqrt(1-lambda) sigma^2 / (n eps^2)), at least 1.
long q_star(double lambda, double sigma, int n, double epsilon);

}  // namespace lmt
