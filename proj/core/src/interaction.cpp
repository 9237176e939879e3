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
#include <exo/interaction.hpp>

namespace exo {

void StrapConfig::validate() const {
  if (!(k_s > 0.0 && c_s > 0.0 && L_s1 > 0.0 && L_s2 > 0.0)) {
    throw ConfigError("strap constants must be strictly positive");
  }
}

Vec InteractionForces::as_vector(int dof) const {
  if (dof == 1) return Vec::Constant(1, F2);
  Vec f(2);
  f << F1, F2;
  return f;
}

InteractionForces InteractionForces::from_vector(const Vec& f) {
  if (f.size() == 1) return {0.0, f[0]};
  return {f[0], f[1]};
}

void EstimatorGains::validate(int dof) const {
  if (K1.size() != dof || K2.size() != dof) throw ConfigError("estimator gains must have dof entries");
  if ((K1.array() < 0.0).any() || (K2.array() < 0.0).any()) {
    throw ConfigError("estimator gains must be non-negative");
  }
}

InteractionForces strap_forces(const StrapConfig& cfg, const JointState& human, const JointState& robot) {
  if (human.dof() != robot.dof() || human.qd.size() != robot.qd.size()) {
    throw ConfigError("human and robot states must have the same dof");
  }
  const Vec dq = human.q - robot.q;
  const Vec dqd = human.qd - robot.qd;
  if (human.dof() == 1) {
    return {0.0, cfg.k_s * cfg.L_s2 * dq[0] + cfg.c_s * cfg.L_s2 * dqd[0]};
  }
  InteractionForces f;
  f.F1 = cfg.k_s * cfg.L_s1 * dq[0] + cfg.c_s * cfg.L_s1 * dqd[0];
  f.F2 = cfg.k_s * (cfg.L_s1 * dq[0] + cfg.L_s2 * dq[1]) + cfg.c_s * (cfg.L_s1 * dqd[0] + cfg.L_s2 * dqd[1]);
  return f;
}

Vec interaction_torques(const StrapConfig& cfg, const InteractionForces& forces, int dof) {
  if (dof == 1) return Vec::Constant(1, cfg.L_s2 * forces.F2);
  Vec t(2);
  t << cfg.L_s1 * forces.F1, cfg.L_s2 * forces.F2;
  return t;
}

HumanStateEstimate estimate_human_state(const JointState& robot, const InteractionForces& forces,
                                        const EstimatorGains& gains) {
  const int dof = robot.dof();
  gains.validate(dof);
  const Vec f = forces.as_vector(dof);
  return {robot.q + gains.K1.cwiseProduct(f), robot.qd + gains.K2.cwiseProduct(f)};
}

}  // namespace exo
