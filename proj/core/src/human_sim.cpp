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

#include <algorithm>
#include <cmath>
#include <numbers>

namespace exo {

TrajectoryProfile TrajectoryProfile::swing_default(int dof) {
  JointProfile hip;
  hip.mean = 0.125;
  hip.amplitude = 0.395;
  JointProfile knee;
  knee.mean = 0.6;
  knee.amplitude = 0.5;
  knee.phase = -0.5 * std::numbers::pi;
  TrajectoryProfile p;
  if (dof == 2) {
    p.joints = {hip, knee};
  } else if (dof == 1) {
    p.joints = {knee};
  } else {
    throw ConfigError("dof must be 1 or 2");
  }
  return p;
}

TrajectorySample reference_trajectory(const TrajectoryProfile& profile, double t) {
  const auto n = static_cast<Eigen::Index>(profile.joints.size());
  TrajectorySample s{Vec(n), Vec(n), Vec(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const JointProfile& j = profile.joints[static_cast<std::size_t>(i)];

    const double sa = std::sin(j.amp_rate * t);
    const double ca = std::cos(j.amp_rate * t);
    const double A = j.amplitude * (1.0 + j.amp_depth * sa);
    const double dA = j.amplitude * j.amp_depth * j.amp_rate * ca;
    const double ddA = -j.amplitude * j.amp_depth * j.amp_rate * j.amp_rate * sa;

    // theta = w0 (t + d/r (1 - cos(r t))); degenerate rate means no modulation.
    double theta = j.frequency * t;
    double dtheta = j.frequency;
    double ddtheta = 0.0;
    if (j.freq_rate != 0.0) {
      const double sf = std::sin(j.freq_rate * t);
      const double cf = std::cos(j.freq_rate * t);
      theta += j.frequency * j.freq_depth / j.freq_rate * (1.0 - cf);
      dtheta = j.frequency * (1.0 + j.freq_depth * sf);
      ddtheta = j.frequency * j.freq_depth * j.freq_rate * cf;
    }

    const double sp = std::sin(theta + j.phase);
    const double cp = std::cos(theta + j.phase);
    s.q[i] = j.mean + A * sp;
    s.qd[i] = dA * sp + A * cp * dtheta;
    s.qdd[i] = ddA * sp + 2.0 * dA * cp * dtheta + A * (cp * ddtheta - sp * dtheta * dtheta);
  }
  return s;
}

Vec human_torque(const LimbModel& model, const JointState& state, const TrajectorySample& desired,
                 const HumanGains& gains, const Vec& T_int) {
  const DynamicsTerms terms = compute_terms(model, state);
  const Vec e = desired.q - state.q;
  const Vec ed = desired.qd - state.qd;
  const Vec v = desired.qdd + gains.Kd.cwiseProduct(ed) + gains.Kp.cwiseProduct(e);
  return terms.M * v + terms.C * state.qd + terms.G + T_int;
}

double human_mass_at(double t, double t_end, double m_start, double m_end) {
  if (!(t_end > 0.0)) return m_start;
  const double s = std::clamp(t / t_end, 0.0, 1.0);
  return m_start + s * (m_end - m_start);
}

}  // namespace exo
