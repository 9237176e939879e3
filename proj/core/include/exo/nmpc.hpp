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
#include <exo/optimizer.hpp>

#include <vector>

namespace exo {

struct NmpcConfig {
  int N_p = 3;           // prediction horizon, steps
  int N_c = 3;           // control horizon, steps
  double r_d = 0.1;      // velocity tracking weight
  double r_t = 1e-6;     // torque increment weight
  double dt = 0.01;      // s
  double T_max = 30.0;   // N m, symmetric torque limit
  double dT_max = 10.0;  // N m per step, symmetric increment limit
  bool warm_start = true;
  /// The optimizer sees J * objective_scale. Zero selects 1 / dt^2, which
  /// puts position errors on the scale of velocity errors and keeps the
  /// finite-difference gradient noise well under kkt_tolerance.
  double objective_scale = 0.0;
  SqpSettings sqp;

  void validate() const;
  [[nodiscard]] double effective_objective_scale() const;
};

/// Torque increments, one row per control step (N_c x dof).
struct ControlPlan {
  Mat dT;

  static ControlPlan zero(int N_c, int dof) { return {Mat::Zero(N_c, dof)}; }
  /// Drop the first increment and append a zero row.
  [[nodiscard]] ControlPlan shifted() const;
  [[nodiscard]] Vec flatten() const;
  static ControlPlan unflatten(const Vec& x, int N_c, int dof);
};

struct HorizonReference {
  std::vector<Vec> q;   // j = 1..N_p
  std::vector<Vec> qd;
};

/// Constant-velocity extrapolation of the estimated human state.
HorizonReference build_reference(const Vec& qH_hat, const Vec& qdH_hat, const NmpcConfig& cfg);

/// Robot states at j = 1..N_p under the plan. Interaction torque is taken as
/// zero; D is the disturbance the caller believes acts on the robot. Coulomb
/// friction keeps the direction of the initial velocity over the horizon, so
/// the rollout is smooth in the plan.
std::vector<JointState> predict_horizon(const LimbModel& model, const JointState& state, const Vec& T_prev,
                                        const ControlPlan& plan, const Vec& D, const NmpcConfig& cfg);

/// Tracking cost: position error, r_d times velocity error, r_t times
/// squared increments.
double nmpc_cost(const std::vector<JointState>& predicted, const HorizonReference& reference,
                 const ControlPlan& plan, const NmpcConfig& cfg);

/// Residual vector whose squared norm is nmpc_cost.
Vec nmpc_residuals(const std::vector<JointState>& predicted, const HorizonReference& reference,
                   const ControlPlan& plan, const NmpcConfig& cfg);

/// Decision-variable constraints for a horizon starting at T_prev.
struct PlanConstraints {
  Mat A;
  Vec b;
  Vec lo;
  Vec hi;
};
PlanConstraints plan_constraints(const Vec& T_prev, const NmpcConfig& cfg);

struct NmpcStepResult {
  Vec T_applied;
  ControlPlan plan;
  SqpResult sqp;
};

/// One receding-horizon solve. warm is the starting plan (already shifted by
/// the caller, or zero). Non-converged solves still return their best plan.
NmpcStepResult nmpc_step(const JointState& state, const Vec& qH_hat, const Vec& qdH_hat, const Vec& T_prev,
                         const Vec& D, const LimbModel& model, const NmpcConfig& cfg, SqpSolver& solver,
                         const ControlPlan& warm);

/// Non-robust controller: nominal model, no disturbance estimate, carries its
/// own warm-start plan and solver workspace.
class NmpcController {
 public:
  NmpcController(LimbModel model, NmpcConfig cfg);

  NmpcStepResult step(const JointState& state, const Vec& qH_hat, const Vec& qdH_hat, const Vec& T_prev);
  /// Same as step() but with a caller-supplied disturbance in the prediction.
  NmpcStepResult step(const JointState& state, const Vec& qH_hat, const Vec& qdH_hat, const Vec& T_prev,
                      const Vec& D);

  [[nodiscard]] const LimbModel& model() const { return model_; }
  [[nodiscard]] const NmpcConfig& config() const { return cfg_; }
  [[nodiscard]] int warnings() const { return warnings_; }
  void reset();

 private:
  LimbModel model_;
  NmpcConfig cfg_;
  SqpSolver solver_;
  ControlPlan previous_;
  bool has_previous_ = false;
  int warnings_ = 0;
};

}  // namespace exo
