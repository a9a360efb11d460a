#include "lmt/lmt_core.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace lmt {
namespace {

using testing::max_abs_diff;
using testing::random_mat;

QuadraticOracle scalar_half_square() {
  return QuadraticOracle({Eigen::MatrixXd::Identity(1, 1)}, {Vec::Zero(1)}, 0.0, 1.0, 1.0);
}

HyperParams params(int Q, double eta_a, double eta_s, double beta, double eta_w) {
  HyperParams hp;
  hp.Q = Q;
  hp.eta_a = eta_a;
  hp.eta_s = eta_s;
  hp.beta = beta;
  hp.eta_w = eta_w;
  return hp;
}

// Q = 1 reference written in the stacked accelerated form: momentum z_{t+1} = beta z_t + (1-beta) g_t,
// tracking pair (y; y_l) <- W̃ (y; y_l) + (z_{t+2} - z_{t+1})_# with (y_0; y_l_0) = (z_1; z_1), and
// iterate pair (x; x_l) <- W̃ ((x; x_l) - eta_hat (y; y))
class DsmtReference {
 public:
  DsmtReference(const Mat& x0, const GradientOracle& oracle, const MixingMatrix& w, const HyperParams& hp,
                const StreamFactory& streams)
      : oracle_(oracle), hp_(hp), streams_(streams), n_(x0.rows()), p_(x0.cols()) {
    big_ = Eigen::MatrixXd::Zero(2 * n_, 2 * n_);
    big_.topLeftCorner(n_, n_) = (1.0 + hp.eta_w) * Eigen::MatrixXd(w.weights());
    big_.topRightCorner(n_, n_) = -hp.eta_w * Eigen::MatrixXd::Identity(n_, n_);
    big_.bottomLeftCorner(n_, n_) = Eigen::MatrixXd::Identity(n_, n_);
    x_.resize(2 * n_, p_);
    x_ << Eigen::MatrixXd(x0), Eigen::MatrixXd(x0);
    z_ = Eigen::MatrixXd::Zero(n_, p_);
  }

  void step() {
    const Eigen::MatrixXd z_next = hp_.beta * z_ + (1.0 - hp_.beta) * gradients();
    if (t_ == 0) {
      y_.resize(2 * n_, p_);
      y_ << z_next, z_next;
    } else {
      Eigen::MatrixXd delta(2 * n_, p_);
      delta << z_next - z_, z_next - z_;
      y_ = big_ * y_ + delta;
    }
    Eigen::MatrixXd ystack(2 * n_, p_);
    ystack << y_.topRows(n_), y_.topRows(n_);
    x_ = big_ * (x_ - hp_.eta_hat() * ystack);
    z_ = z_next;
    ++t_;
  }

  Eigen::MatrixXd x() const { return x_.topRows(n_); }

 private:
  Eigen::MatrixXd gradients() const {
    Eigen::MatrixXd g(n_, p_);
    Vec gi(p_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      CounterRng rng = streams_.stream(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t_), 0);
      oracle_.stochastic_gradient_into(static_cast<int>(i), x_.row(i).transpose(), rng, gi);
      g.row(i) = gi.transpose();
    }
    return g;
  }

  const GradientOracle& oracle_;
  HyperParams hp_;
  StreamFactory streams_;
  Eigen::Index n_, p_;
  Eigen::MatrixXd big_, x_, y_, z_;
  long t_ = 0;
};

TEST(InitState, ZeroStartAndShapes) {
  const LmtState s = init_state(Mat::Zero(3, 2));
  for (const Mat* m : {&s.X, &s.X_l, &s.Z, &s.C, &s.C_prev}) EXPECT_TRUE(m->isZero(0.0));
  EXPECT_EQ(s.t, 0);

  const Mat x0 = random_mat(4, 3, 1);
  const LmtState r = init_state(x0);
  EXPECT_EQ(r.X, x0);
  EXPECT_EQ(r.X_l, x0);
  EXPECT_TRUE(r.Z.isZero(0.0) && r.C.isZero(0.0) && r.C_prev.isZero(0.0));

  const LmtState one = init_state(Mat::Ones(1, 5));
  EXPECT_EQ(one.Z.rows(), 1);
  EXPECT_EQ(one.Z.cols(), 5);
}

TEST(InitState, RejectsNonFinite) {
  Mat x0 = Mat::Zero(2, 2);
  x0(1, 0) = std::nan("");
  try {
    init_state(x0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
  x0(1, 0) = INFINITY;
  EXPECT_THROW(init_state(x0), Error);
}

TEST(Validate, RejectsBadHyperParameters) {
  EXPECT_NO_THROW(validate(params(1, 0.1, 1.0, 0.0, 0.5)));
  for (const HyperParams& hp : {params(0, 0.1, 1.0, 0.0, 0.5), params(1, 0.0, 1.0, 0.0, 0.5),
                                params(1, 0.1, -1.0, 0.0, 0.5), params(1, 0.1, 1.0, 1.0, 0.5),
                                params(1, 0.1, 1.0, -0.1, 0.5), params(1, 0.1, 1.0, 0.5, 1.0)}) {
    try {
      validate(hp);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Parameter);
    }
  }
}

TEST(Validate, WarnsWhenBetaBelowRho) {
  const LcaParams lca = lca_params(0.5);
  EXPECT_EQ(theory_warnings(params(1, 0.1, 1.0, lca.rho_w, lca.eta_w), lca).size(), 0u);
  EXPECT_EQ(theory_warnings(params(1, 0.1, 1.0, 0.0, lca.eta_w), lca).size(), 1u);
}

TEST(HyperParams, EtaHatIsExactProduct) {
  const HyperParams hp = params(7, 0.03, 0.2, 0.5, 0.5);
  EXPECT_EQ(hp.eta_hat(), 0.03 * 0.2 * 7.0);
}

TEST(LocalUpdate, ScalarHandTrace) {
  const auto f = scalar_half_square();
  const LmtState s = init_state(Mat::Ones(1, 1));
  const LocalPhase out = local_update_phase(s, f, params(1, 1.0, 1.0, 0.0, 0.5), StreamFactory(0, 0));
  EXPECT_DOUBLE_EQ(out.X_Q(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.R(0, 0), 1.0);
}

TEST(LocalUpdate, SingleStepResidualIsTheGradient) {
  const auto f = quadratic_pl_oracle(4, 3, 0.1, 1.0, 1.0, 9);
  LmtState s = init_state(random_mat(4, 3, 2));
  s.C = random_mat(4, 3, 3);
  const StreamFactory streams(11, 2);
  const LocalPhase out = local_update_phase(s, *f, params(1, 0.2, 1.0, 0.0, 0.5), streams);
  for (int i = 0; i < 4; ++i) {
    CounterRng rng = streams.stream(static_cast<std::uint64_t>(i), 0, 0);
    const Vec g = f->stochastic_gradient(i, s.X.row(i).transpose(), rng);
    EXPECT_LE((out.R.row(i).transpose() - g).norm(), 1e-13);
  }
}

TEST(LocalUpdate, CancellingCorrectionFreezesIterate) {
  const auto f = testing::identity_quadratic(3, 2);
  LmtState s = init_state(random_mat(3, 2, 5));
  s.C = -f.stacked_gradient(s.X);
  const LocalPhase out = local_update_phase(s, f, params(6, 0.3, 1.0, 0.0, 0.5), StreamFactory(1, 0));
  EXPECT_LE(max_abs_diff(out.X_Q, s.X), 1e-15);
  EXPECT_LE(max_abs_diff(out.R, -s.C), 1e-13);
}

TEST(LocalUpdate, DeterministicResidualAveragesPathGradients) {
  const auto f = quadratic_pl_oracle(3, 4, 0.1, 1.0, 0.0, 4);
  LmtState s = init_state(random_mat(3, 4, 6));
  s.C = random_mat(3, 4, 7, 0.1);
  const HyperParams hp = params(5, 0.1, 1.0, 0.0, 0.5);
  const LocalPhase out = local_update_phase(s, *f, hp, StreamFactory(0, 0), true);
  ASSERT_TRUE(out.X_locals.has_value());
  ASSERT_EQ(out.X_locals->size(), 5u);
  EXPECT_EQ((*out.X_locals)[0], s.X);
  Mat avg = Mat::Zero(3, 4);
  for (const Mat& xl : *out.X_locals) avg += f->stacked_gradient(xl) / 5.0;
  EXPECT_LE(max_abs_diff(out.R, avg), 1e-12);
  EXPECT_LE(max_abs_diff(out.R, out.G_sum_avg), 1e-12);
}

TEST(MomentumUpdate, Examples) {
  const Mat z = random_mat(3, 2, 1);
  const Mat r = random_mat(3, 2, 2);
  EXPECT_EQ(momentum_update(z, r, 0.0), r);
  EXPECT_EQ(momentum_update(z, r, 1.0), z);
  EXPECT_LE(max_abs_diff(momentum_update(z, z, 0.37), z), 1e-15);
  EXPECT_LE(max_abs_diff(momentum_update(z, r, 0.25), 0.25 * z + 0.75 * r), 1e-15);
  EXPECT_THROW(momentum_update(z, Mat::Zero(2, 2), 0.5), Error);
}

TEST(TrackingAndCorrection, FirstRoundTracksMomentum) {
  const auto w = build_ring_mixing(5);
  const LmtState s = init_state(Mat::Zero(5, 3));
  const Mat z = random_mat(5, 3, 8);
  const Tracking tr = tracking_and_correction(s, z, w, 0.7);
  EXPECT_EQ(tr.Y, z);
  EXPECT_EQ(tr.Y_l, z);
}

TEST(TrackingAndCorrection, SingleAgentScalar) {
  const auto w = build_complete_mixing(1);
  LmtState s = init_state(Mat::Zero(1, 1));
  const Mat z = Mat::Constant(1, 1, 2.0);
  EXPECT_NEAR(tracking_and_correction(s, z, w, 0.6).C_next(0, 0), 0.0, 1e-15);
  s.C(0, 0) = 0.5;
  s.C_prev(0, 0) = 0.2;
  EXPECT_NEAR(tracking_and_correction(s, z, w, 0.6).C_next(0, 0), 0.5 + 0.6 * (0.5 - 0.2), 1e-15);
}

TEST(TrackingAndCorrection, PreservesZeroMeanCorrections) {
  const auto w = build_ring_mixing(6);
  LmtState s = init_state(Mat::Zero(6, 2));
  s.C = random_mat(6, 2, 9);
  s.C.rowwise() -= s.C.colwise().mean();
  s.C_prev = random_mat(6, 2, 10);
  s.C_prev.rowwise() -= s.C_prev.colwise().mean();
  const Tracking tr = tracking_and_correction(s, random_mat(6, 2, 11), w, 0.8);
  EXPECT_LE(tr.C_next.colwise().mean().norm(), 1e-14);
}

TEST(AcceleratedConsensus, ConsensusFixedPoint) {
  const auto w = build_ring_mixing(4);
  const Mat c = Eigen::RowVectorXd::LinSpaced(3, 1.0, 3.0).replicate(4, 1);
  LmtState s = init_state(c);
  const Consensus out = accelerated_consensus(s, Mat::Zero(4, 3), w, params(1, 0.1, 1.0, 0.0, 0.9));
  EXPECT_LE(max_abs_diff(out.X_next, c), 1e-14);
  EXPECT_LE(max_abs_diff(out.X_l_next, c), 1e-14);
}

TEST(AcceleratedConsensus, NoAccelerationIsPlainMixing) {
  const auto w = build_ring_mixing(5);
  LmtState s = init_state(random_mat(5, 2, 1));
  s.X_l = random_mat(5, 2, 2);
  const Mat y = random_mat(5, 2, 3);
  const HyperParams hp = params(2, 0.1, 0.5, 0.0, 0.0);
  const Consensus out = accelerated_consensus(s, y, w, hp);
  EXPECT_LE(max_abs_diff(out.X_next, w.weights() * (s.X - hp.eta_hat() * y)), 1e-15);
}

TEST(AcceleratedConsensus, EqualsAugmentedOperator) {
  const auto w = build_ring_mixing(9);
  const LcaParams lca = lca_params(w.lambda());
  for (std::uint64_t k = 0; k < 10; ++k) {
    LmtState s = init_state(random_mat(9, 4, 20 + k));
    s.X_l = random_mat(9, 4, 40 + k);
    const Mat y = random_mat(9, 4, 60 + k);
    const HyperParams hp = params(3, 0.05, 0.4, 0.9, lca.eta_w);
    const Consensus out = accelerated_consensus(s, y, w, hp);
    const AugmentedPair ref =
        apply_augmented(w, lca.eta_w, {s.X - hp.eta_hat() * y, s.X_l - hp.eta_hat() * y});
    EXPECT_LE(max_abs_diff(out.X_next, ref.top), 1e-13);
    EXPECT_LE(max_abs_diff(out.X_l_next, ref.bottom), 1e-13);
  }
}

TEST(LmtRound, ScalarHandTrace) {
  const auto f = scalar_half_square();
  const auto w = build_complete_mixing(1);
  const RoundResult res =
      lmt_round(init_state(Mat::Ones(1, 1)), f, w, params(1, 1.0, 1.0, 0.0, 0.5), StreamFactory(0, 0));
  EXPECT_DOUBLE_EQ(res.state.X(0, 0), 0.0);
  EXPECT_EQ(res.state.t, 1);
}

TEST(LmtRound, SingleAgentIsGradientDescent) {
  const auto f = quadratic_pl_oracle(1, 4, 0.2, 1.0, 0.0, 12);
  const auto w = build_complete_mixing(1);
  const HyperParams hp = params(1, 0.3, 0.9, 0.0, 0.5);
  LmtState s = init_state(random_mat(1, 4, 13));
  Vec x = s.X.row(0).transpose();
  for (int t = 0; t < 50; ++t) {
    s = lmt_round(s, *f, w, hp, StreamFactory(0, 0)).state;
    x -= hp.eta_hat() * f->full_gradient(0, x);
    EXPECT_LE((s.X.row(0).transpose() - x).norm(), 1e-12 * (1.0 + x.norm())) << t;
  }
}

TEST(LmtRound, AdvancesStateBookkeeping) {
  const auto f = quadratic_pl_oracle(5, 3, 0.1, 1.0, 1.0, 2);
  const auto w = build_ring_mixing(5);
  const LcaParams lca = lca_params(w.lambda());
  const HyperParams hp = params(3, 0.1, 0.5, lca.rho_w, lca.eta_w);
  LmtState s = init_state(random_mat(5, 3, 4));
  for (int t = 0; t < 5; ++t) {
    const RoundResult res = lmt_round(s, *f, w, hp, StreamFactory(3, 0));
    EXPECT_EQ(res.state.t, s.t + 1);
    EXPECT_EQ(res.state.C_prev, s.C);
    EXPECT_LE(max_abs_diff(res.state.Z, momentum_update(s.Z, res.outputs.R, hp.beta)), 0.0);
    EXPECT_LE(max_abs_diff(res.outputs.Y, res.state.Z + s.C), 0.0);
    s = res.state;
  }
}

TEST(LmtRound, PerRoundIdentities) {
  const auto f = quadratic_pl_oracle(8, 4, 0.1, 1.0, 1.0, 21);
  const auto w = build_ring_mixing(8);
  const LcaParams lca = lca_params(w.lambda());
  const HyperParams hp = params(4, 0.05, 0.5, lca.rho_w, lca.eta_w);
  const StreamFactory streams(77, 0);
  LmtState s = init_state(random_mat(8, 4, 1));
  for (int t = 0; t < 100; ++t) {
    const RoundResult res = lmt_round(s, *f, w, hp, streams);
    const Vec y_bar = row_mean(res.outputs.Y);
    const double zn = res.state.Z.norm();
    EXPECT_LE((y_bar - row_mean(res.state.Z)).norm(), 1e-10 * (1.0 + zn));
    EXPECT_LE((y_bar - row_mean(res.outputs.Y_l)).norm(), 1e-10 * (1.0 + zn));
    EXPECT_LE((row_mean(res.state.X) - (row_mean(s.X) - hp.eta_hat() * y_bar)).norm(), 1e-10 * (1.0 + s.X.norm()));
    EXPECT_LE(row_mean(res.state.C).norm(), 1e-10);
    s = res.state;
  }
}

TEST(LmtRound, HomogeneousConsensusStartStaysInConsensus) {
  std::vector<Eigen::MatrixXd> a(6, Eigen::MatrixXd::Identity(3, 3) * 0.7);
  std::vector<Vec> b(6, Vec::LinSpaced(3, -1.0, 1.0));
  const QuadraticOracle f(a, b, 0.0, 0.7, 0.7);
  const auto w = build_ring_mixing(6);
  const LcaParams lca = lca_params(w.lambda());
  LmtState s = init_state(Eigen::RowVectorXd::Constant(3, 2.0).replicate(6, 1));
  for (int t = 0; t < 30; ++t) {
    s = lmt_round(s, f, w, params(3, 0.1, 0.5, lca.rho_w, lca.eta_w), StreamFactory(0, 0)).state;
    EXPECT_LE((s.X.rowwise() - s.X.row(0)).norm(), 1e-13);
  }
}

TEST(LmtRound, SingleLocalStepMatchesDsmtReference) {
  const auto f = quadratic_pl_oracle(10, 5, 0.1, 1.0, 1.0, 31);
  const auto w = build_ring_mixing(10);
  const LcaParams lca = lca_params(w.lambda());
  const HyperParams hp = params(1, 0.1, 0.8, lca.rho_w, lca.eta_w);
  const StreamFactory streams(2024, 3);
  const Mat x0 = random_mat(10, 5, 17);
  LmtState s = init_state(x0);
  DsmtReference ref(x0, *f, w, hp, streams);
  for (int t = 0; t < 100; ++t) {
    s = lmt_round(s, *f, w, hp, streams).state;
    ref.step();
  }
  EXPECT_LE((Eigen::MatrixXd(s.X) - ref.x()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(LmtRound, ShapeMismatchRejected) {
  const auto f = quadratic_pl_oracle(4, 3, 0.1, 1.0, 0.0, 2);
  const auto w = build_ring_mixing(5);
  try {
    lmt_round(init_state(Mat::Zero(4, 3)), *f, w, params(1, 0.1, 1.0, 0.0, 0.5), StreamFactory());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(NaiveMomentum, SingleLocalStepCoincidesWithLmt) {
  const auto f = quadratic_pl_oracle(6, 3, 0.1, 1.0, 1.0, 5);
  const auto w = build_ring_mixing(6);
  const LcaParams lca = lca_params(w.lambda());
  const HyperParams hp = params(1, 0.1, 0.7, lca.rho_w, lca.eta_w);
  const StreamFactory streams(8, 1);
  LmtState a = init_state(random_mat(6, 3, 3));
  LmtState b = a;
  for (int t = 0; t < 50; ++t) {
    a = lmt_round(a, *f, w, hp, streams).state;
    b = naive_local_momentum_round(b, *f, w, hp, streams).state;
  }
  EXPECT_LE(max_abs_diff(a.X, b.X), 1e-12);
  EXPECT_LE(max_abs_diff(a.Z, b.Z), 1e-12);
}

TEST(NaiveMomentum, ZeroMomentumCoincidesWithLmt) {
  const auto f = quadratic_pl_oracle(6, 3, 0.1, 1.0, 1.0, 5);
  const auto w = build_ring_mixing(6);
  const LcaParams lca = lca_params(w.lambda());
  const HyperParams hp = params(5, 0.05, 0.7, 0.0, lca.eta_w);
  const StreamFactory streams(8, 1);
  LmtState a = init_state(random_mat(6, 3, 3));
  LmtState b = a;
  for (int t = 0; t < 50; ++t) {
    a = lmt_round(a, *f, w, hp, streams).state;
    b = naive_local_momentum_round(b, *f, w, hp, streams).state;
  }
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.C, b.C);
}

TEST(NaiveMomentum, DiffersWhenMomentumActsWithinRounds) {
  const auto f = quadratic_pl_oracle(6, 3, 0.1, 1.0, 1.0, 5);
  const auto w = build_ring_mixing(6);
  const LcaParams lca = lca_params(w.lambda());
  const HyperParams hp = params(4, 0.05, 0.7, lca.rho_w, lca.eta_w);
  const LmtState s = init_state(random_mat(6, 3, 3));
  const Mat a = lmt_round(s, *f, w, hp, StreamFactory(1, 0)).state.X;
  const Mat b = naive_local_momentum_round(s, *f, w, hp, StreamFactory(1, 0)).state.X;
  EXPECT_GT(max_abs_diff(a, b), 1e-6);
}

TEST(Theorem1Schedule, NoiselessConstants) {
  const Theorem1Schedule s = theorem1_stepsizes(1.0, 0.0, 10, 1, 1000, 1.0, 0.0);
  EXPECT_NEAR(s.params.eta_hat(), 1.0 / (30.0 * std::sqrt(3.0 * 14.0 * 883.0)), 1e-18);
  EXPECT_NEAR(s.params.eta_hat(), 1.7309e-4, 5e-9);
  EXPECT_NEAR(s.params.eta_a, 1.0 / (15.0 * std::sqrt(1766.0)), 1e-18);
  EXPECT_NEAR(s.params.eta_a, 1.5864e-3, 5e-8);
  EXPECT_NEAR(s.params.eta_s, s.params.eta_hat() / s.params.eta_a, 1e-15);
  EXPECT_TRUE(s.eta_s_within_bound);
  EXPECT_NEAR(s.eta_s_bound, 1.0 / std::sqrt(6.0 * 14.0), 1e-15);
}

TEST(Theorem1Schedule, EtaHatDecreasesWithHorizon) {
  double prev = INFINITY;
  for (long T = 10; T <= 100000; T *= 2) {
    const double eta = theorem1_stepsizes(1.0, 1.0, 20, 4, T, 0.5, 0.9).params.eta_hat();
    EXPECT_LT(eta, prev);
    prev = eta;
  }
}

TEST(Theorem1Schedule, ReportsBoundViolationWithNoise) {
  const Theorem1Schedule s = theorem1_stepsizes(1.0, 1.0, 20, 1, 1000, 0.2, 0.9);
  EXPECT_GT(s.params.eta_s, s.eta_s_bound);
  EXPECT_FALSE(s.eta_s_within_bound);
}

TEST(Theorem1Schedule, RejectsNonpositiveInputs) {
  for (auto call : {+[] { theorem1_stepsizes(0.0, 1.0, 1, 1, 1, 1.0, 0.0); },
                    +[] { theorem1_stepsizes(1.0, 1.0, 1, 1, 1, 0.0, 0.0); },
                    +[] { theorem1_stepsizes(1.0, -1.0, 1, 1, 1, 1.0, 0.0); },
                    +[] { theorem1_stepsizes(1.0, 1.0, 0, 1, 1, 1.0, 0.0); },
                    +[] { theorem1_stepsizes(1.0, 1.0, 1, 1, 1, 1.0, 1.0); }}) {
    try {
      call();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Parameter);
    }
  }
}

TEST(Theorem2Schedule, Examples) {
  const HyperParams a = theorem2_stepsizes(1.0, 1, 100, 0.0);
  EXPECT_DOUBLE_EQ(a.eta_a, 0.01);
  EXPECT_NEAR(a.beta, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(a.eta_s, (1.0 - std::sqrt(0.5)) / std::sqrt(210.0), 1e-15);
  double prev = INFINITY;
  for (long T = 1; T <= 1 << 20; T *= 4) {
    const double eta_a = theorem2_stepsizes(0.1, 3, T, 0.9).eta_a;
    EXPECT_LT(eta_a, prev);
    prev = eta_a;
  }
  EXPECT_THROW(theorem2_stepsizes(0.0, 1, 10, 0.5), Error);
  EXPECT_THROW(theorem2_stepsizes(1.0, 1, 0, 0.5), Error);
}

TEST(Figure1Schedule, RingFiftyQTen) {
  const auto w = build_ring_mixing(50);
  const HyperParams hp = figure1_stepsizes(10, w.lambda());
  EXPECT_DOUBLE_EQ(hp.eta_a, 0.025);
  EXPECT_DOUBLE_EQ(hp.eta_s, 0.1);
  EXPECT_DOUBLE_EQ(hp.beta, lca_params(w.lambda()).rho_w);
  EXPECT_DOUBLE_EQ(hp.eta_w, lca_params(w.lambda()).eta_w);
}

TEST(QStar, Examples) {
  EXPECT_EQ(q_star(0.5, 0.0, 10, 0.1), 1);
  EXPECT_EQ(q_star(1.0 - 0.0025, 10.0, 10, 0.1), 50);
  EXPECT_EQ(q_star(0.5, 1.0, 10, 100.0), 1);
  EXPECT_EQ(q_star(0.0, 3.0, 1, 1.0), 9);
  for (double eps : {0.0, -1.0}) {
    try {
      q_star(0.5, 1.0, 10, eps);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Domain);
    }
  }
}

}  // namespace
}  // namespace lmt
