/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#include <exo/metrics.hpp>
#include <exo/msnmpc.hpp>
#include <exo/rk4.hpp>
#include <exo/simulation.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace exo {
namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

TEST(Blend, EqualWeights) {
  const NmpcConfig cfg;
  const Vec mu = Vec::Constant(3, 1.0 / 3.0);
  const Vec T = blend_increments(Vec::Zero(2), mu, {v2(3, 0), v2(0, 3), v2(-3, 0)}, cfg);
  EXPECT_NEAR(T[0], 0.0, 1e-15);
  EXPECT_NEAR(T[1], 1.0, 1e-15);
}

TEST(Blend, DegenerateWeightsPickOneScenario) {
  const NmpcConfig cfg;
  const Vec T_prev = v2(4.0, -2.0);
  bool clamped = true;
  const Vec T = blend_increments(T_prev, (Vec(3) << 1, 0, 0).finished(), {v2(1.5, -0.25), v2(9, 9), v2(-9, -9)}, cfg,
                                 &clamped);
  EXPECT_EQ(T, T_prev + v2(1.5, -0.25));
  EXPECT_FALSE(clamped);
}

TEST(Blend, ClampedToLimits) {
  const NmpcConfig cfg;
  bool clamped = false;
  const Vec T = blend_increments(v2(28.0, -5.0), Vec::Ones(1), {v2(9.0, -12.0)}, cfg, &clamped);
  EXPECT_EQ(T, v2(30.0, -15.0));
  EXPECT_TRUE(clamped);
}

TEST(Probabilities, IdenticalEvidenceKeepsPrior) {
  const Vec prior = (Vec(3) << 0.2, 0.5, 0.3).finished();
  const Vec v = v2(0.01, -0.02);
  const Mat S = Mat::Identity(2, 2) * 0.1;
  const ProbabilityUpdate u = update_probabilities(prior, {v, v, v}, {S, S, S}, 100.0, 1e-4);
  EXPECT_LT((u.mu - prior).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Probabilities, HandExample) {
  const ProbabilityUpdate u = update_probabilities(Vec::Constant(2, 0.5), {Vec::Zero(1), Vec::Ones(1)},
                                                   {Mat::Identity(1, 1), Mat::Identity(1, 1)}, 1.0, 1e-4);
  EXPECT_NEAR(u.mu[0], 1.0 / (1.0 + std::exp(-0.5)), 1e-12);
  EXPECT_NEAR(u.mu.sum(), 1.0, 1e-15);
}

TEST(Probabilities, FloorHolds) {
  const Vec mu = floor_and_normalize((Vec(3) << 1e-6, 0.4, 0.6 - 1e-6).finished(), 1e-4);
  EXPECT_GE(mu.minCoeff(), 1e-4);
  EXPECT_NEAR(mu.sum(), 1.0, 1e-15);
  // A sharp likelihood drives two entries to the floor.
  const ProbabilityUpdate u = update_probabilities(Vec::Constant(3, 1.0 / 3.0), {Vec::Zero(1), Vec::Ones(1), Vec::Ones(1)},
                                                   {Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1)},
                                                   1e4, 1e-4);
  EXPECT_DOUBLE_EQ(u.mu[1], 1e-4);
  EXPECT_DOUBLE_EQ(u.mu[2], 1e-4);
  EXPECT_NEAR(u.mu[0], 1.0 - 2e-4, 1e-15);
}

TEST(Probabilities, UnusableLikelihoodsKeepPrior) {
  const Vec prior = (Vec(2) << 0.7, 0.3).finished();
  const Mat bad = -Mat::Identity(1, 1);
  const ProbabilityUpdate u = update_probabilities(prior, {Vec::Zero(1), Vec::Zero(1)}, {bad, bad}, 1.0, 1e-4);
  EXPECT_TRUE(u.underflow);
  EXPECT_LT((u.mu - prior).cwiseAbs().maxCoeff(), 1e-15);
}

// 1-DOF plant driven open loop; measurements exact.
struct OpenLoop {
  LimbModel plant;
  Vec D;
  Vec x;
  double dt = 0.01;

  Vec torque(double t) const { return Vec::Constant(1, 2.0 * std::sin(3.0 * t)); }
  void advance(double t) {
    const Vec T = torque(t);
    auto f = [&](const Vec& s) -> Vec {
      const JointState js = JointState::from_stacked(s);
      Vec dx(2);
      dx << js.qd, forward_dynamics_robot(plant, js, T, Vec::Zero(1), D);
      return dx;
    };
    x = rk4_step(f, x, dt);
  }
};

TEST(Ekf, ConsistentFilterHasNoInnovation) {
  OpenLoop p{LimbModel::robot_default(1), Vec::Zero(1), (Vec(2) << 0.3, 0.5).finished()};
  const EkfConfig cfg;
  EkfState ekf = EkfState::initial(p.x, 1, cfg);
  for (int k = 0; k < 50; ++k) {
    const double t = k * p.dt;
    p.advance(t);
    const EkfUpdate u = ekf_step(p.plant, ekf, p.torque(t), Vec::Zero(1), p.x, p.dt, cfg);
    EXPECT_LE(u.innovation.norm(), 1e-9);
  }
  EXPECT_EQ(Eigen::LLT<Mat>(ekf.P).info(), Eigen::Success);
  EXPECT_LE((ekf.P - ekf.P.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Ekf, RecoversConstantDisturbance) {
  OpenLoop p{LimbModel::robot_default(1), Vec::Constant(1, 0.5), (Vec(2) << 0.2, 0.0).finished()};
  const EkfConfig cfg;
  EkfState ekf = EkfState::initial(p.x, 1, cfg);
  for (int k = 0; k < 300; ++k) {
    const double t = k * p.dt;
    p.advance(t);
    ekf_step(p.plant, ekf, p.torque(t), Vec::Zero(1), p.x, p.dt, cfg);
    if ((k + 1) * p.dt >= 2.0 - 1e-12) {
      EXPECT_NEAR(ekf.disturbance()[0], 0.5, 0.05) << "t=" << (k + 1) * p.dt;
    }
  }
}

TEST(Ekf, WrongPayloadHasLargerInnovation) {
  OpenLoop p{LimbModel::robot_default(1), Vec::Zero(1), (Vec(2) << 0.2, 0.0).finished()};
  const EkfConfig cfg;
  const LimbModel right = LimbModel::robot_default(1);
  const LimbModel wrong = right.with_payload(2.0);
  EkfState a = EkfState::initial(p.x, 1, cfg);
  EkfState b = EkfState::initial(p.x, 1, cfg);
  std::vector<double> sum_a(5, 0.0), sum_b(5, 0.0);
  for (int k = 0; k < 500; ++k) {
    const double t = k * p.dt;
    p.advance(t);
    const double na = ekf_step(right, a, p.torque(t), Vec::Zero(1), p.x, p.dt, cfg).innovation.norm();
    const double nb = ekf_step(wrong, b, p.torque(t), Vec::Zero(1), p.x, p.dt, cfg).innovation.norm();
    sum_a[static_cast<std::size_t>(k / 100)] += na;
    sum_b[static_cast<std::size_t>(k / 100)] += nb;
  }
  for (std::size_t w = 1; w < 5; ++w) EXPECT_GT(sum_b[w], sum_a[w]) << "window " << w;
}

TEST(MultiStage, IdenticalScenariosReduceToNominal) {
  const LimbModel nominal = LimbModel::robot_default(2);
  MsSettings s;
  s.hypotheses = {1.0, 1.0, 1.0};
  s.use_disturbance_estimate = false;
  MultiStageNmpc ms(nominal, s);
  NmpcController single(nominal.with_payload(1.0), s.nmpc);
  JointState st{v2(0.2, 0.5), v2(0.4, -0.3)};
  Vec T = compute_terms(nominal.with_payload(1.0), st).G;
  for (int k = 0; k < 10; ++k) {
    const Vec qH = st.q + v2(0.01, -0.02);
    const MsStepResult a = ms.step(st.stacked(), Vec::Zero(2), qH, st.qd, T);
    const NmpcStepResult b = single.step(st, qH, st.qd, T);
    EXPECT_LE((a.T_applied - b.T_applied).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(a.mu.sum(), 1.0, 1e-12);
    T = b.T_applied;
    st.q += 0.01 * st.qd;
  }
}

TEST(MultiStage, InvalidSettingsRejected) {
  MsSettings s;
  s.hypotheses.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = MsSettings{};
  s.c1 = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

SimConfig short_run(double payload, double duration) {
  SimConfig c = SimConfig::defaults(2);
  c.true_payload = payload;
  c.duration = duration;
  c.settle = std::min(c.settle, 0.5 * duration);
  c.record_timing = false;
  return c;
}

TEST(MultiStage, SerialAndThreadedAreBitIdentical) {
  SimConfig c = short_run(1.0, 2.0);
  c.threads = 1;
  const SimLog serial = run_simulation(c, ControllerKind::msnmpc);
  c.threads = 3;
  const SimLog threaded = run_simulation(c, ControllerKind::msnmpc);
  ASSERT_EQ(serial.rows.size(), threaded.rows.size());
  for (std::size_t k = 0; k < serial.rows.size(); ++k) {
    ASSERT_EQ(serial.rows[k].TR, threaded.rows[k].TR) << "step " << k;
    ASSERT_EQ(serial.rows[k].mu, threaded.rows[k].mu) << "step " << k;
  }
}

class BeliefConvergence : public ::testing::TestWithParam<int> {};

TEST_P(BeliefConvergence, TrueHypothesisWinsWithinFiveSeconds) {
  const int index = GetParam();
  // The true plant matches the hypothesis exactly only without mass wobble,
  // so every uncertainty source is off here.
  SimConfig c = short_run(static_cast<double>(index), 10.0);
  c.uncertainty = UncertaintyFlags::none();
  const SimLog log = run_simulation(c, ControllerKind::msnmpc);
  ASSERT_FALSE(log.aborted) << log.abort_reason;
  for (const auto& r : log.rows) {
    if (r.t >= 5.0) {
      ASSERT_GT(r.mu[index], 0.95) << "t=" << r.t;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Payloads, BeliefConvergence, ::testing::Values(0, 1, 2));

}  // namespace
}  // namespace exo
