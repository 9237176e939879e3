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
#include <exo/human_sim.hpp>
#include <exo/rk4.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace exo {
namespace {

TEST(Trajectory, PureSinusoidWithoutModulation) {
  TrajectoryProfile p = TrajectoryProfile::swing_default(2);
  for (auto& j : p.joints) {
    j.amp_depth = 0.0;
    j.freq_depth = 0.0;
  }
  for (double t : {0.0, 0.37, 2.5, 11.0}) {
    const TrajectorySample s = reference_trajectory(p, t);
    for (int i = 0; i < 2; ++i) {
      const auto& j = p.joints[static_cast<std::size_t>(i)];
      EXPECT_NEAR(s.qdd[i], -j.frequency * j.frequency * (s.q[i] - j.mean), 1e-12);
    }
  }
}

TEST(Trajectory, StartsAtMeanWithZeroPhase) {
  TrajectoryProfile p = TrajectoryProfile::swing_default(2);
  p.joints[1].phase = 0.0;
  const TrajectorySample s = reference_trajectory(p, 0.0);
  EXPECT_NEAR(s.q[0], p.joints[0].mean, 1e-15);
  EXPECT_NEAR(s.q[1], p.joints[1].mean, 1e-15);
}

TEST(Trajectory, DerivativesMatchFiniteDifferences) {
  const TrajectoryProfile p = TrajectoryProfile::swing_default(2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> when(0.0, 60.0);
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const double t = when(rng);
    const TrajectorySample s = reference_trajectory(p, t);
    const TrajectorySample a = reference_trajectory(p, t + h);
    const TrajectorySample b = reference_trajectory(p, t - h);
    const Vec fd_qd = (a.q - b.q) / (2.0 * h);
    const Vec fd_qdd = (a.qd - b.qd) / (2.0 * h);
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(fd_qd[i], s.qd[i], 1e-6 * std::max(1.0, std::abs(s.qd[i])));
      EXPECT_NEAR(fd_qdd[i], s.qdd[i], 1e-5 * std::max(1.0, std::abs(s.qdd[i])));
    }
  }
}

TEST(Trajectory, StaysInSwingRange) {
  const TrajectoryProfile p = TrajectoryProfile::swing_default(2);
  double max_qd = 0.0;
  for (double t = 0.0; t <= 60.0; t += 1e-3) max_qd = std::max(max_qd, reference_trajectory(p, t).qd.cwiseAbs().maxCoeff());
  Vec prev = reference_trajectory(p, 0.0).q;
  for (double t = 0.0; t <= 60.0; t += 1e-4) {
    const Vec q = reference_trajectory(p, t).q;
    EXPECT_GE(q[0], -0.35);
    EXPECT_LE(q[0], 0.6);
    EXPECT_GE(q[1], 0.0);
    EXPECT_LE(q[1], 1.2);
    EXPECT_LE((q - prev).cwiseAbs().maxCoeff(), max_qd * 1e-4 * 1.01);
    prev = q;
  }
}

TEST(HumanTorque, OnTrajectoryIsInverseDynamics) {
  const LimbModel m = LimbModel::human_from_body_mass(2, 72.0);
  const TrajectorySample d = reference_trajectory(TrajectoryProfile::swing_default(2), 1.3);
  const JointState s{d.q, d.qd};
  const DynamicsTerms t = compute_terms(m, s);
  const Vec T = human_torque(m, s, d, HumanGains::defaults(2), Vec::Zero(2));
  EXPECT_LT((T - (t.M * d.qdd + t.C * d.qd + t.G)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HumanTorque, InteractionFeedsThroughWithUnitGain) {
  const LimbModel m = LimbModel::human_from_body_mass(2, 72.0);
  const TrajectorySample d = reference_trajectory(TrajectoryProfile::swing_default(2), 0.8);
  const JointState s{(d.q.array() + 0.02).matrix(), (d.qd.array() - 0.1).matrix()};
  const Vec x = (Vec(2) << 1.7, -0.6).finished();
  const Vec diff = human_torque(m, s, d, HumanGains::defaults(2), x) - human_torque(m, s, d, HumanGains::defaults(2), Vec::Zero(2));
  EXPECT_LT((diff - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HumanTorque, ClosedLoopAccelerationIsLinearErrorDynamics) {
  const LimbModel m = LimbModel::human_from_body_mass(2, 65.0);
  const TrajectorySample d = reference_trajectory(TrajectoryProfile::swing_default(2), 2.2);
  const JointState s{(d.q.array() - 0.05).matrix(), (d.qd.array() + 0.3).matrix()};
  const HumanGains g = HumanGains::defaults(2);
  const Vec T_int = (Vec(2) << 0.4, -0.2).finished();
  const Vec T = human_torque(m, s, d, g, T_int);
  const Vec qdd = forward_dynamics_human(m, s, T, T_int);
  const Vec expected = d.qdd + g.Kd.cwiseProduct(d.qd - s.qd) + g.Kp.cwiseProduct(d.q - s.q);
  EXPECT_LT((qdd - expected).cwiseAbs().maxCoeff(), 1e-9);
}

// Critically damped decay e(t) = e0 (1 + 20 t) exp(-20 t) with the leg free.
// e(0.3) is still 1.7e-3, so the small-error check runs to 0.35 s.
TEST(HumanTorque, OffsetDecaysCriticallyDamped) {
  const LimbModel m = LimbModel::human_from_body_mass(2, 60.0);
  const TrajectoryProfile p = TrajectoryProfile::swing_default(2);
  const HumanGains g = HumanGains::defaults(2);
  const TrajectorySample d0 = reference_trajectory(p, 0.0);
  Vec x(4);
  x << d0.q.array() + 0.1, d0.qd;
  const double dt = 1e-3;
  double prev_err = 0.1;
  for (int k = 1; k <= 350; ++k) {
    const double t0 = (k - 1) * dt;
    auto f = [&](double t, const Vec& y) -> Vec {
      const JointState s = JointState::from_stacked(y);
      const Vec T = human_torque(m, s, reference_trajectory(p, t), g, Vec::Zero(2));
      Vec dy(4);
      dy << s.qd, forward_dynamics_human(m, s, T, Vec::Zero(2));
      return dy;
    };
    x = rk4_step(f, t0, x, dt);
    const double t = k * dt;
    const double err = x[0] - reference_trajectory(p, t).q[0];
    EXPECT_NEAR(err, 0.1 * (1.0 + 20.0 * t) * std::exp(-20.0 * t), 1e-6);
    EXPECT_LE(std::abs(err), prev_err + 1e-12);
    prev_err = std::abs(err);
  }
  EXPECT_LT(prev_err, 1e-3);
}

TEST(HumanMass, LinearRamp) {
  EXPECT_DOUBLE_EQ(human_mass_at(0.0, 30.0, 60.0, 85.0), 60.0);
  EXPECT_DOUBLE_EQ(human_mass_at(15.0, 30.0, 60.0, 85.0), 72.5);
  EXPECT_DOUBLE_EQ(human_mass_at(30.0, 30.0, 60.0, 85.0), 85.0);
  EXPECT_DOUBLE_EQ(human_mass_at(40.0, 30.0, 60.0, 85.0), 85.0);
  EXPECT_DOUBLE_EQ(human_mass_at(-1.0, 30.0, 60.0, 85.0), 60.0);
}

TEST(HumanModel, AnthropometricFractions) {
  const LimbModel m = LimbModel::human_from_body_mass(2, 80.0, 1.75);
  EXPECT_NEAR(m.links[0].mass, 8.0, 1e-12);
  EXPECT_NEAR(m.links[1].mass, 4.88, 1e-12);
  EXPECT_NEAR(m.links[0].length, 0.245 * 1.75, 1e-12);
  EXPECT_NEAR(m.links[1].com_distance, 0.434 * 0.246 * 1.75, 1e-12);
  EXPECT_EQ(m.coulomb_friction, Vec::Zero(2));
}

}  // namespace
}  // namespace exo
