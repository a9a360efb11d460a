#include "lmt/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace lmt {

namespace {

double relative(const Vec& lhs, const Vec& rhs) {
  return (lhs - rhs).norm() / std::max({1.0, lhs.norm(), rhs.norm()});
}

}  // namespace

double consensus_error(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  const Eigen::RowVectorXd mean = m.colwise().mean();
  return (m.rowwise() - mean).squaredNorm();
}

Vec d_bar_sequence(const Vec& x_bar_t, const Vec& x_bar_prev, double beta, long t) {
  if (t < 0) fail(ErrorKind::Domain, "d_bar_sequence requires t >= 0");
  if (!(beta >= 0.0 && beta < 1.0)) fail(ErrorKind::Domain, "d_bar_sequence requires 0 <= beta < 1");
  if (t == 0) return x_bar_t;
  if (x_bar_prev.size() != x_bar_t.size()) fail(ErrorKind::Dimension, "d_bar_sequence: iterate sizes differ");
  return (x_bar_t - beta * x_bar_prev) / (1.0 - beta);
}

double optimality_gap_mean(const GradientOracle& oracle, const Mat& x) {
  const auto f_star = oracle.f_star();
  if (!f_star) fail(ErrorKind::UnavailableMetric, "optimality gap needs f*");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sum += oracle.global_value(x.row(i).transpose());
  return sum / static_cast<double>(x.rows()) - *f_star;
}

double momentum_deviation(const GradientOracle& oracle, const Mat& z, const Vec& x_bar) {
  double sum = 0.0;
  Vec g(oracle.dim());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    oracle.gradient_into(static_cast<int>(i), x_bar, g);
    sum += (z.row(i).transpose() - g).squaredNorm();
  }
  return sum;
}

double lyapunov_surrogate(const LyapunovTerms& terms, const HyperParams& hp, double smoothness,
                          const LcaParams& lca) {
  if (!terms.f_star) fail(ErrorKind::UnavailableMetric, "Lyapunov surrogate needs f*");
  const double eta = hp.eta_hat();
  const double l2 = smoothness * smoothness;
  const double n = terms.n;
  const double one_b = 1.0 - hp.beta;
  const double one_rho = 1.0 - lca.rho_w;
  const double local = hp.eta_a * hp.eta_a * hp.Q * hp.Q;
  return terms.f_d_bar - *terms.f_star
         + 4.0 * eta * eta * eta * l2 / (one_b * one_b * one_b) * terms.z_bar.squaredNorm()
         + 11.0 * eta * l2 / (n * one_rho) * terms.consensus_x
         + 21.0 * eta * local * l2 / (n * one_rho) * terms.consensus_y
         + 6.0 * (1.0 + 63.0 * lca.c0) * eta * local * l2 / (n * one_b) * terms.z_dev;
}

double running_stationarity(std::span<const RoundTrace> traces) {
  if (traces.empty()) fail(ErrorKind::Domain, "running_stationarity needs at least one round");
  double sum = 0.0;
  for (const auto& tr : traces) sum += tr.grad_norm_avg;
  return sum / static_cast<double>(traces.size());
}

IdentityResiduals identity_residuals(const LmtState& before, const LmtState& after, const RoundOutputs& out,
                                     const HyperParams& hp, const Vec& x_bar_prev) {
  IdentityResiduals r;
  const Vec y_bar = row_mean(out.Y);
  const Vec z_next_bar = row_mean(after.Z);
  r.tracking = (y_bar - z_next_bar).norm() / (1.0 + after.Z.norm());
  r.tracking_l = (y_bar - row_mean(out.Y_l)).norm() / (1.0 + after.Z.norm());

  const Vec x_bar = row_mean(before.X);
  const Vec x_bar_next = row_mean(after.X);
  const double eta = hp.eta_hat();
  r.averaged_step = (x_bar_next - (x_bar - eta * y_bar)).norm() / (1.0 + before.X.norm());
  r.correction_mean = row_mean(after.C).norm();

  const Vec d_t = d_bar_sequence(x_bar, x_bar_prev, hp.beta, before.t);
  const Vec d_next = d_bar_sequence(x_bar_next, x_bar, hp.beta, after.t);
  r.dbar_recursion = relative(d_next, d_t - eta * row_mean(out.G_sum_avg));
  const Vec z_bar = row_mean(before.Z);
  r.dbar_identity = relative(d_t - x_bar, -(eta * hp.beta / (1.0 - hp.beta)) * z_bar);
  return r;
}

}  // namespace lmt
