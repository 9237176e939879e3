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
#pragma once

#include <exo/dynamics.hpp>

#include <vector>

namespace exo {

/// Modulated sinusoid for one joint:
///   q(t) = mean + A(t) sin(theta(t) + phase)
///   A(t) = amplitude (1 + amp_depth sin(amp_rate t))
///   theta'(t) = frequency (1 + freq_depth sin(freq_rate t)), theta(0) = 0
struct JointProfile {
  double mean = 0.0;       // rad
  double amplitude = 0.4;  // rad
  double frequency = 3.141592653589793;  // rad/s
  double amp_depth = 0.2;
  double amp_rate = 0.2;   // rad/s
  double freq_depth = 0.15;
  double freq_rate = 0.2;  // rad/s
  double phase = 0.0;      // rad
};

struct TrajectoryProfile {
  std::vector<JointProfile> joints;

  /// Swing-phase defaults: hip around 0.125 rad, knee around 0.6 rad lagging
  /// the hip by a quarter period. 1 DOF uses the knee profile.
  static TrajectoryProfile swing_default(int dof);
};

struct TrajectorySample {
  Vec q;
  Vec qd;
  Vec qdd;
};

/// Desired human trajectory with exact analytic first and second derivatives.
TrajectorySample reference_trajectory(const TrajectoryProfile& profile, double t);

struct HumanGains {
  Vec Kp;  // 1/s^2
  Vec Kd;  // 1/s

  static HumanGains defaults(int dof) { return {Vec::Constant(dof, 400.0), Vec::Constant(dof, 40.0)}; }
};

/// Feedback-linearizing "brain" torque. Cancels the leg's own dynamics and the
/// interaction torque so the tracking error obeys e'' + Kd e' + Kp e = 0.
Vec human_torque(const LimbModel& model, const JointState& state, const TrajectorySample& desired,
                 const HumanGains& gains, const Vec& T_int);

/// Linear body-mass ramp, clamped to [0, t_end].
double human_mass_at(double t, double t_end, double m_start, double m_end);

}  // namespace exo
