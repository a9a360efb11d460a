#pragma once

#include "lmt/common.hpp"
#include "lmt/objectives.hpp"
#include "lmt/rng.hpp"
#include "lmt/topology.hpp"

#include <string>
#include <string_view>

namespace lmt {

enum class Method {
  Lmt,
  NaiveLmt,
  LocalDsgd,
  Led,
  Kgt,
  Pdsgdm,
  Scaffold,
};

/// Accepts lmt | naive_lmt | local_dsgd | led | kgt | pdsgdm | scaffold.
Method parse_method(std::string_view tag);
std::string to_string(Method m);
bool is_decentralized(Method m);

struct MethodStepsizes {
  double local = 0.0;  // step used inside the local loop
  double outer = 1.0;  // multiplier applied to the round displacement (1 = none)
};

/// Maps the (eta_a, eta_s) pair onto each method so that every method's averaged
/// iterate moves by eta_a * eta_s * Q times an average gradient:
///   lmt, naive_lmt, kgt, scaffold: (eta_a, eta_s)
///   led, local_dsgd:               (eta_a * eta_s, 1)
///   pdsgdm:                        (eta_a * eta_s * (1 - beta), 1)
MethodStepsizes stepsize_parity_map(double eta_a, double eta_s, double beta, Method method);
MethodStepsizes stepsize_parity_map(double eta_a, double eta_s, double beta, std::string_view method);

struct BaselineSpec {
  Method method = Method::LocalDsgd;
  int Q = 1;
  MethodStepsizes steps;
  double beta = 0.0;  // PD-SGDM only
};

/// Per-method state. `aux` is the ED dual variable (LED), the tracking correction
/// (K-GT), the momentum buffers (PD-SGDM) or the client control variates (SCAFFOLD);
/// unused by Local DSGD. `server_control` is SCAFFOLD's global control variate.
struct BaselineState {
  Mat X;
  Mat aux;
  Vec server_control;
  long t = 0;
};

BaselineState init_baseline_state(const Mat& x0);

/// One communication round of a comparison method.
///
///  Local DSGD (Koloskova et al. 2020): Q plain SGD steps, then X <- W X.
///  LED (Alghunaim 2024): Q steps on g + d_i, Z <- X^Q, D <- D + (I - W) Z / (gamma Q),
///      X <- W Z; for Q = 1 this is exact diffusion with combination matrix W.
///  K-GT (Liu et al. 2024): Q steps on g + c_i, y = (X - X^Q)/(eta Q),
///      X <- W (X - eta_s (X - X^Q)), C <- C - y + W y.
///  PD-SGDM (Gao & Huang 2020): Q heavy-ball steps m <- beta m + g, x <- x - gamma m,
///      then X <- W X; momentum buffers stay local.
///  SCAFFOLD (Karimireddy et al. 2020, option II, full participation): server model
///      broadcast to every row, Q steps on g - c_i + c, server step eta_s on the
///      mean displacement. Ignores W.
BaselineState baseline_round(const BaselineSpec& spec, const BaselineState& state, const GradientOracle& oracle,
                             const MixingMatrix& w, const StreamFactory& streams);

}  // namespace lmt
