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

namespace exo {

/// Spring-damper straps. Thigh strap sits L_s1 below the hip, shank strap L_s2
/// below the knee.
struct StrapConfig {
  double k_s = 937.5;  // N/m
  double c_s = 93.7;   // N s/m
  double L_s1 = 0.28;  // m
  double L_s2 = 0.16;  // m

  void validate() const;
};

/// Strap forces. For a 1-DOF limb only the shank strap exists and F1 is zero.
struct InteractionForces {
  double F1 = 0.0;  // N, thigh strap
  double F2 = 0.0;  // N, shank strap

  /// Per-joint force vector: (F1, F2) for 2 DOF, (F2) for 1 DOF.
  [[nodiscard]] Vec as_vector(int dof) const;
  static InteractionForces from_vector(const Vec& f);
};

/// Human-state estimator gains; diagonal entries only.
struct EstimatorGains {
  Vec K1;  // rad/N
  Vec K2;  // rad/(N s)

  static EstimatorGains defaults(int dof) {
    return {Vec::Constant(dof, 0.005), Vec::Constant(dof, 0.05)};
  }
  void validate(int dof) const;
};

/// Forces generated by the human/robot angle and velocity gap. The shank strap
/// sees the hip gap as well because it rides on the thigh-shank chain.
InteractionForces strap_forces(const StrapConfig& cfg, const JointState& human, const JointState& robot);

/// Joint torques from strap forces via their lever arms: diag(L_s1, L_s2) F.
Vec interaction_torques(const StrapConfig& cfg, const InteractionForces& forces, int dof);

struct HumanStateEstimate {
  Vec q;
  Vec qd;
};

/// q_H ~ q_R + K1 F, qd_H ~ qd_R + K2 F.
HumanStateEstimate estimate_human_state(const JointState& robot, const InteractionForces& forces,
                                        const EstimatorGains& gains);

}  // namespace exo
