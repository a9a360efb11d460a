#include "lmt/lmt_core.hpp"

#include <cmath>

namespace lmt {

namespace {

constexpr double kC0 = 14.0;

void require_state_shapes(const LmtState& s) {
  require_same_shape(s.X, s.X_l, "LmtState X_l");
  require_same_shape(s.X, s.Z, "LmtState Z");
  require_same_shape(s.X, s.C, "LmtState C");
  require_same_shape(s.X, s.C_prev, "LmtState C_prev");
}

void require_matching(const LmtState& s, const GradientOracle& oracle, const MixingMatrix& w) {
  require_state_shapes(s);
  if (s.X.rows() != oracle.n_agents() || s.X.cols() != oracle.dim()) {
    fail(ErrorKind::Dimension, "state is " + std::to_string(s.X.rows()) + "x" + std::to_string(s.X.cols()) +
                                   " but oracle has n=" + std::to_string(oracle.n_agents()) +
                                   ", p=" + std::to_string(oracle.dim()));
  }
  if (s.X.rows() != w.n()) fail(ErrorKind::Dimension, "state and mixing matrix disagree on n");
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::Parameter, std::string(name) + " must be positive and finite");
}

}  // namespace

void validate(const HyperParams& hp) {
  if (hp.Q < 1) fail(ErrorKind::Parameter, "Q must be >= 1");
  require_positive(hp.eta_a, "eta_a");
  require_positive(hp.eta_s, "eta_s");
  if (!(hp.beta >= 0.0 && hp.beta < 1.0)) fail(ErrorKind::Parameter, "beta must lie in [0, 1)");
  if (!(hp.eta_w >= 0.0 && hp.eta_w < 1.0)) fail(ErrorKind::Parameter, "eta_w must lie in [0, 1)");
}

std::vector<std::string> theory_warnings(const HyperParams& hp, const LcaParams& lca) {
  std::vector<std::string> out;
  if (hp.beta < lca.rho_w) {
    out.push_back("beta=" + format_double(hp.beta) + " is below rho_w=" + format_double(lca.rho_w) +
                  "; convergence guarantees assume beta >= rho_w");
  }
  return out;
}

LmtState init_state(const Mat& x0) {
  if (x0.size() == 0) fail(ErrorKind::Validation, "initial iterate is empty");
  if (!x0.allFinite()) fail(ErrorKind::Validation, "initial iterate has NaN/Inf entries");
  LmtState s;
  s.X = x0;
  s.X_l = x0;
  s.Z = Mat::Zero(x0.rows(), x0.cols());
  s.C = s.Z;
  s.C_prev = s.Z;
  s.t = 0;
  return s;
}

LocalPhase local_update_phase(const LmtState& state, const GradientOracle& oracle, const HyperParams& hp,
                              const StreamFactory& streams, bool record_locals) {
  const Eigen::Index n = state.X.rows();
  const Eigen::Index p = state.X.cols();
  LocalPhase out;
  out.X_Q.resize(n, p);
  out.G_sum_avg.resize(n, p);
  if (record_locals) out.X_locals.emplace(static_cast<std::size_t>(hp.Q), Mat(n, p));

  Vec x(p), g(p), g_sum(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    x = state.X.row(i).transpose();
    const Vec c = state.C.row(i).transpose();
    g_sum.setZero();
    for (int l = 0; l < hp.Q; ++l) {
      if (record_locals) (*out.X_locals)[static_cast<std::size_t>(l)].row(i) = x.transpose();
      CounterRng rng = streams.stream(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(state.t),
                                      static_cast<std::uint64_t>(l));
      try {
        oracle.stochastic_gradient_into(static_cast<int>(i), x, rng, g);
      } catch (const Error& e) {
        fail(e.kind(), "agent " + std::to_string(i) + ", local step " + std::to_string(l) + ": " + e.what());
      }
      g_sum += g;
      x -= hp.eta_a * (g + c);
    }
    out.X_Q.row(i) = x.transpose();
    out.G_sum_avg.row(i) = g_sum.transpose() / static_cast<double>(hp.Q);
  }
  out.R = (state.X - out.X_Q) / (hp.eta_a * static_cast<double>(hp.Q)) - state.C;
  return out;
}

Mat momentum_update(const Mat& z, const Mat& r, double beta) {
  require_same_shape(z, r, "momentum_update");
  return beta * z + (1.0 - beta) * r;
}

Tracking tracking_and_correction(const LmtState& state, const Mat& z_next, const MixingMatrix& w, double eta_w) {
  require_state_shapes(state);
  require_same_shape(state.C, z_next, "tracking_and_correction");
  if (z_next.rows() != w.n()) fail(ErrorKind::Dimension, "tracking_and_correction: n mismatch with W");
  Tracking out;
  out.Y = z_next + state.C;
  out.Y_l = z_next + state.C_prev;
  out.C_next = state.C - out.Y + (1.0 + eta_w) * (w.weights() * out.Y) - eta_w * out.Y_l;
  return out;
}

Consensus accelerated_consensus(const LmtState& state, const Mat& y, const MixingMatrix& w, const HyperParams& hp) {
  require_same_shape(state.X, state.X_l, "accelerated_consensus");
  require_same_shape(state.X, y, "accelerated_consensus");
  if (y.rows() != w.n()) fail(ErrorKind::Dimension, "accelerated_consensus: n mismatch with W");
  const double step = hp.eta_hat();
  Consensus out;
  Mat half = state.X - step * y;
  const Mat half_l = state.X_l - step * y;
  out.X_next = (1.0 + hp.eta_w) * (w.weights() * half) - hp.eta_w * half_l;
  out.X_l_next = std::move(half);
  return out;
}

RoundResult lmt_round(const LmtState& state, const GradientOracle& oracle, const MixingMatrix& w,
                      const HyperParams& hp, const StreamFactory& streams, bool record_locals) {
  validate(hp);
  require_matching(state, oracle, w);

  LocalPhase local = local_update_phase(state, oracle, hp, streams, record_locals);
  Mat z_next = momentum_update(state.Z, local.R, hp.beta);
  Tracking tr = tracking_and_correction(state, z_next, w, hp.eta_w);
  Consensus cons = accelerated_consensus(state, tr.Y, w, hp);

  RoundResult res;
  res.state.X = std::move(cons.X_next);
  res.state.X_l = std::move(cons.X_l_next);
  res.state.Z = std::move(z_next);
  res.state.C_prev = state.C;
  res.state.C = std::move(tr.C_next);
  res.state.t = state.t + 1;
  res.outputs.Y = std::move(tr.Y);
  res.outputs.Y_l = std::move(tr.Y_l);
  res.outputs.R = std::move(local.R);
  res.outputs.G_sum_avg = std::move(local.G_sum_avg);
  res.outputs.X_locals = std::move(local.X_locals);
  return res;
}

RoundResult naive_local_momentum_round(const LmtState& state, const GradientOracle& oracle, const MixingMatrix& w,
                                       const HyperParams& hp, const StreamFactory& streams) {
  validate(hp);
  require_matching(state, oracle, w);
  const Eigen::Index n = state.X.rows();
  const Eigen::Index p = state.X.cols();

  Mat x_q(n, p), z_last(n, p), g_avg(n, p);
  Vec x(p), z(p), g(p), g_sum(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    x = state.X.row(i).transpose();
    z = state.Z.row(i).transpose();
    const Vec c = state.C.row(i).transpose();
    g_sum.setZero();
    for (int l = 0; l < hp.Q; ++l) {
      CounterRng rng = streams.stream(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(state.t),
                                      static_cast<std::uint64_t>(l));
      oracle.stochastic_gradient_into(static_cast<int>(i), x, rng, g);
      g_sum += g;
      z = hp.beta * z + (1.0 - hp.beta) * g;
      x -= hp.eta_a * (z + c);
    }
    x_q.row(i) = x.transpose();
    z_last.row(i) = z.transpose();
    g_avg.row(i) = g_sum.transpose() / static_cast<double>(hp.Q);
  }
  // Average of z^1..z^Q recovered from the displacement, as r is in lmt_round.
  Mat z_avg = (state.X - x_q) / (hp.eta_a * static_cast<double>(hp.Q)) - state.C;

  Tracking tr = tracking_and_correction(state, z_avg, w, hp.eta_w);
  Consensus cons = accelerated_consensus(state, tr.Y, w, hp);

  RoundResult res;
  res.state.X = std::move(cons.X_next);
  res.state.X_l = std::move(cons.X_l_next);
  res.state.Z = std::move(z_last);
  res.state.C_prev = state.C;
  res.state.C = std::move(tr.C_next);
  res.state.t = state.t + 1;
  res.outputs.Y = std::move(tr.Y);
  res.outputs.Y_l = std::move(tr.Y_l);
  res.outputs.R = std::move(z_avg);
  res.outputs.G_sum_avg = std::move(g_avg);
  return res;
}

Theorem1Schedule theorem1_stepsizes(double smoothness, double sigma, int n, int Q, long T, double delta_f,
                                    double beta) {
  require_positive(smoothness, "L");
  require_positive(delta_f, "delta_f");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail(ErrorKind::Parameter, "sigma must be >= 0");
  if (n < 1 || Q < 1 || T < 1) fail(ErrorKind::Parameter, "n, Q and T must be >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) fail(ErrorKind::Parameter, "beta must lie in [0, 1)");

  const double s2 = sigma * sigma;
  const double q = Q;
  const double tt = static_cast<double>(T);
  const double eta_hat = 1.0 / (std::sqrt(3.0 * smoothness * s2 * tt / (8.0 * n * q * delta_f)) +
                                30.0 * std::sqrt(3.0 * kC0 * (1.0 + 63.0 * kC0)) * smoothness / (1.0 - beta));
  const double eta_a = 1.0 / (std::sqrt(3.0 * q * smoothness * s2 * tt / (8.0 * delta_f)) +
                              15.0 * std::sqrt(2.0 * (1.0 + 63.0 * kC0)) * q * smoothness);

  Theorem1Schedule out;
  out.params.Q = Q;
  out.params.eta_a = eta_a;
  out.params.eta_s = eta_hat / (eta_a * q);
  out.params.beta = beta;
  out.eta_s_bound = (1.0 - beta) / std::sqrt(6.0 * kC0);
  out.eta_s_within_bound = out.params.eta_s <= out.eta_s_bound * (1.0 + 1e-12);
  return out;
}

HyperParams theorem2_stepsizes(double mu, int Q, long T, double lambda) {
  require_positive(mu, "mu");
  if (Q < 1 || T < 1) fail(ErrorKind::Parameter, "Q and T must be >= 1");
  const LcaParams lca = lca_params(lambda);
  HyperParams hp;
  hp.Q = Q;
  hp.eta_a = 1.0 / (static_cast<double>(Q) * mu * static_cast<double>(T));
  hp.eta_s = (1.0 - lca.rho_w) / std::sqrt(15.0 * kC0);
  hp.beta = lca.rho_w;
  hp.eta_w = lca.eta_w;
  return hp;
}

HyperParams figure1_stepsizes(int Q, double lambda) {
  if (Q < 1) fail(ErrorKind::Parameter, "Q must be >= 1");
  const LcaParams lca = lca_params(lambda);
  HyperParams hp;
  hp.Q = Q;
  hp.eta_a = 0.25 / static_cast<double>(Q);
  hp.eta_s = 0.1;
  hp.beta = lca.rho_w;
  hp.eta_w = lca.eta_w;
  return hp;
}

long q_star(double lambda, double sigma, int n, double epsilon) {
  if (!(epsilon > 0.0)) fail(ErrorKind::Domain, "q_star requires epsilon > 0");
  if (n < 1) fail(ErrorKind::Domain, "q_star requires n >= 1");
  if (!(sigma >= 0.0)) fail(ErrorKind::Domain, "q_star requires sigma >= 0");
  if (!(lambda >= 0.0 && lambda < 1.0)) fail(ErrorKind::Domain, "q_star requires 0 <= lambda < 1");
  const double ratio = std::sqrt(1.0 - lambda) * sigma * sigma / (static_cast<double>(n) * epsilon * epsilon);
  // Shave a few ulps so exact integers computed through sqrt do not round up.
  const double q = std::ceil(ratio * (1.0 - 1e-12));
  return q < 1.0 ? 1L : static_cast<long>(q);
}

}  // namespace lmt
