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
#include <exo/nmpc.hpp>
#include <exo/optimizer.hpp>

#include <vector>

namespace exo {

/// Diagonal noise levels of the disturbance-augmented EKF. Values are per-step
/// variances.
struct EkfConfig {
  double q_pos = 1e-6;
  double q_vel = 1e-4;
  double q_dist = 1e-4;
  double r_pos = 1e-6;
  double r_vel = 1e-2;  // covers the moving-average lag on the velocity channel
  double p0 = 1e-2;
  double jacobian_step = 1e-6;

  void validate() const;
};

/// State (q, qd, D) of one scenario's filter. D is a per-joint lumped
/// disturbance modeled as a random walk.
struct EkfState {
  Vec x;
  Mat P;
  Mat S;  // innovation covariance of the latest update
  Mat Q;
  Mat R;
  int covariance_repairs = 0;

  static EkfState initial(const Vec& y0, int dof, const EkfConfig& cfg);
  [[nodiscard]] int dof() const { return static_cast<int>(x.size() / 3); }
  [[nodiscard]] Vec disturbance() const { return x.tail(dof()); }
  [[nodiscard]] JointState joint_state() const { return {x.head(dof()), x.segment(dof(), dof())}; }
};

struct EkfUpdate {
  Vec innovation;  // y - y_predicted
  Mat S;           // H P- H' + R
};

/// Predict one dt with the scenario model under the known inputs (applied
/// torque and measured interaction torque), then correct against
/// y = (q_R, qd_R). Jacobians by central differences.
EkfUpdate ekf_step(const LimbModel& model, EkfState& ekf, const Vec& T_applied, const Vec& T_int, const Vec& y,
                   double dt, const EkfConfig& cfg);

struct ProbabilityUpdate {
  Vec mu;
  bool underflow = false;  // no usable likelihood; prior kept
};

/// Likelihood-weighted scenario probabilities with a lower floor. The floor is
/// enforced after renormalization, so the result lies on the simplex and every
/// entry is at least floor.
ProbabilityUpdate update_probabilities(const Vec& prior, const std::vector<Vec>& innovations,
                                       const std::vector<Mat>& S, double c1, double floor);

/// Renormalize to sum one while holding every entry at or above floor.
Vec floor_and_normalize(const Vec& mu, double floor);

struct MsSettings {
  std::vector<double> hypotheses{0.0, 1.0, 2.0};  // kg
  double c1 = 100.0;
  double mu_floor = 1e-4;
  NmpcConfig nmpc;
  EkfConfig ekf;
  /// Feed each scenario's disturbance estimate into its prediction.
  bool use_disturbance_estimate = true;
  int threads = 1;

  void validate() const;
};

struct Scenario {
  double payload = 0.0;
  LimbModel model;
  EkfState ekf;
  double mu = 0.0;
  ControlPlan plan;
  bool has_plan = false;
};

struct MsStepResult {
  Vec T_applied;
  Vec mu;
  Vec blended_increment;
  std::vector<ControlPlan> plans;
  std::vector<SqpResult> sqp;
  std::vector<Vec> D_hat;
  bool underflow = false;
  bool clamped = false;
};

/// T_prev + sum_i mu_i dT_i, then clamped to the torque and increment limits.
/// clamped reports whether the clamp changed anything.
Vec blend_increments(const Vec& T_prev, const Vec& mu, const std::vector<Vec>& first_increments,
                     const NmpcConfig& cfg, bool* clamped = nullptr);

/// Scenario-tree robust NMPC with one EKF and one SQP workspace per scenario.
class MultiStageNmpc {
 public:
  MultiStageNmpc(const LimbModel& nominal, MsSettings settings);

  /// y = (q_R, qd_R) as measured; T_int_meas is the interaction torque from
  /// the measured strap forces; T_prev the torque applied last step.
  MsStepResult step(const Vec& y, const Vec& T_int_meas, const Vec& qH_hat, const Vec& qdH_hat, const Vec& T_prev);

  [[nodiscard]] const std::vector<Scenario>& scenarios() const { return scenarios_; }
  [[nodiscard]] const MsSettings& settings() const { return settings_; }
  [[nodiscard]] int warnings() const { return warnings_; }
  [[nodiscard]] int underflow_events() const { return underflow_events_; }

 private:
  void solve_scenario(std::size_t i, const JointState& state, const Vec& qH_hat, const Vec& qdH_hat,
                      const Vec& T_prev, NmpcStepResult& out);

  MsSettings settings_;
  std::vector<Scenario> scenarios_;
  std::vector<SqpSolver> solvers_;
  Vec last_T_int_;
  bool initialized_ = false;
  int warnings_ = 0;
  int underflow_events_ = 0;
};

}  // namespace exo
