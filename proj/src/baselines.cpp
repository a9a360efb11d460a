#include "lmt/baselines.hpp"

#include <array>
#include <utility>

namespace lmt {

namespace {

constexpr std::array<std::pair<std::string_view, Method>, 7> kMethodTags{{
    {"lmt", Method::Lmt},
    {"naive_lmt", Method::NaiveLmt},
    {"local_dsgd", Method::LocalDsgd},
    {"led", Method::Led},
    {"kgt", Method::Kgt},
    {"pdsgdm", Method::Pdsgdm},
    {"scaffold", Method::Scaffold},
}};

CounterRng stream_for(const StreamFactory& f, Eigen::Index agent, long round, int step) {
  return f.stream(static_cast<std::uint64_t>(agent), static_cast<std::uint64_t>(round),
                  static_cast<std::uint64_t>(step));
}

}  // namespace

Method parse_method(std::string_view tag) {
  for (const auto& [name, m] : kMethodTags)
    if (name == tag) return m;
  fail(ErrorKind::Configuration, "unknown method '" + std::string(tag) + "'");
}

std::string to_string(Method m) {
  for (const auto& [name, value] : kMethodTags)
    if (value == m) return std::string(name);
  return "unknown";
}

bool is_decentralized(Method m) { return m != Method::Scaffold; }

MethodStepsizes stepsize_parity_map(double eta_a, double eta_s, double beta, Method method) {
  if (!(eta_a > 0.0) || !(eta_s > 0.0)) fail(ErrorKind::Parameter, "step sizes must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) fail(ErrorKind::Parameter, "beta must lie in [0, 1)");
  switch (method) {
    case Method::Lmt:
    case Method::NaiveLmt:
    case Method::Kgt:
    case Method::Scaffold:
      return {eta_a, eta_s};
    case Method::Led:
    case Method::LocalDsgd:
      return {eta_a * eta_s, 1.0};
    case Method::Pdsgdm:
      return {eta_a * eta_s * (1.0 - beta), 1.0};
  }
  fail(ErrorKind::Configuration, "unknown method");
}

MethodStepsizes stepsize_parity_map(double eta_a, double eta_s, double beta, std::string_view method) {
  return stepsize_parity_map(eta_a, eta_s, beta, parse_method(method));
}

BaselineState init_baseline_state(const Mat& x0) {
  if (x0.size() == 0 || !x0.allFinite()) fail(ErrorKind::Validation, "initial iterate must be finite and nonempty");
  BaselineState s;
  s.X = x0;
  s.aux = Mat::Zero(x0.rows(), x0.cols());
  s.server_control = Vec::Zero(x0.cols());
  return s;
}

BaselineState baseline_round(const BaselineSpec& spec, const BaselineState& state, const GradientOracle& oracle,
                             const MixingMatrix& w, const StreamFactory& streams) {
  if (spec.Q < 1) fail(ErrorKind::Parameter, "Q must be >= 1");
  if (!(spec.steps.local > 0.0) || !(spec.steps.outer > 0.0)) fail(ErrorKind::Parameter, "step sizes must be positive");
  const Eigen::Index n = state.X.rows();
  const Eigen::Index p = state.X.cols();
  if (n != oracle.n_agents() || p != oracle.dim() || n != w.n()) {
    fail(ErrorKind::Dimension, "baseline state does not match oracle/topology");
  }
  require_same_shape(state.X, state.aux, "baseline aux");
  const Mat& W = w.weights();
  const double gamma = spec.steps.local;
  const double q = spec.Q;

  BaselineState next;
  next.t = state.t + 1;
  next.server_control = state.server_control;

  Mat x_q(n, p);
  Vec x(p), g(p), m(p);

  switch (spec.method) {
    case Method::LocalDsgd: {
      for (Eigen::Index i = 0; i < n; ++i) {
        x = state.X.row(i).transpose();
        for (int l = 0; l < spec.Q; ++l) {
          CounterRng rng = stream_for(streams, i, state.t, l);
          oracle.stochastic_gradient_into(static_cast<int>(i), x, rng, g);
          x -= gamma * g;
        }
        x_q.row(i) = x.transpose();
      }
      next.X = W * x_q;
      next.aux = state.aux;
      break;
    }
    case Method::Led: {
      for (Eigen::Index i = 0; i < n; ++i) {
        x = state.X.row(i).transpose();
        const Vec d = state.aux.row(i).transpose();
        for (int l = 0; l < spec.Q; ++l) {
          CounterRng rng = stream_for(streams, i, state.t, l);
          oracle.stochastic_gradient_into(static_cast<int>(i), x, rng, g);
          x -= gamma * (g + d);
        }
        x_q.row(i) = x.transpose();
      }
      next.aux = state.aux + (x_q - W * x_q) / (gamma * q);
      next.X = W * x_q;
      break;
    }
    case Method::Kgt: {
      for (Eigen::Index i = 0; i < n; ++i) {
        x = state.X.row(i).transpose();
        const Vec c = state.aux.row(i).transpose();
        for (int l = 0; l < spec.Q; ++l) {
          CounterRng rng = stream_for(streams, i, state.t, l);
          oracle.stochastic_gradient_into(static_cast<int>(i), x, rng, g);
          x -= gamma * (g + c);
        }
        x_q.row(i) = x.transpose();
      }
      const Mat y = (state.X - x_q) / (gamma * q);
      next.X = W * (state.X - spec.steps.outer * (state.X - x_q));
      next.aux = state.aux - y + W * y;
      break;
    }
    case Method::Pdsgdm: {
      next.aux.resize(n, p);
      for (Eigen::Index i = 0; i < n; ++i) {
        x = state.X.row(i).transpose();
        m = state.aux.row(i).transpose();
        for (int l = 0; l < spec.Q; ++l) {
          CounterRng rng = stream_for(streams, i, state.t, l);
          oracle.stochastic_gradient_into(static_cast<int>(i), x, rng, g);
          m = spec.beta * m + g;
          x -= gamma * m;
        }
        x_q.row(i) = x.transpose();
        next.aux.row(i) = m.transpose();
      }
      next.X = W * x_q;
      break;
    }
    case Method::Scaffold: {
      const Vec server = row_mean(state.X);
      next.aux.resize(n, p);
      for (Eigen::Index i = 0; i < n; ++i) {
        x = server;
        const Vec c_i = state.aux.row(i).transpose();
        const Vec drift = state.server_control - c_i;
        for (int l = 0; l < spec.Q; ++l) {
          CounterRng rng = stream_for(streams, i, state.t, l);
          oracle.stochastic_gradient_into(static_cast<int>(i), x, rng, g);
          x -= gamma * (g + drift);
        }
        x_q.row(i) = x.transpose();
        next.aux.row(i) = (c_i - state.server_control + (server - x) / (gamma * q)).transpose();
      }
      const Vec new_server = server + spec.steps.outer * (row_mean(x_q) - server);
      next.server_control = state.server_control + row_mean(next.aux) - row_mean(state.aux);
      next.X = new_server.transpose().replicate(n, 1);
      break;
    }
    case Method::Lmt:
    case Method::NaiveLmt:
      fail(ErrorKind::Configuration, "baseline_round does not run " + to_string(spec.method) + "; use lmt_round");
  }
  return next;
}

}  // namespace lmt
