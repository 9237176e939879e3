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

#include <exo/types.hpp>

#include <vector>

namespace exo {

/// One rigid link of a planar chain. Inertia is about the link's own center of mass.
struct LinkParams {
  double mass = 1.0;          // kg
  double length = 0.4;        // m
  double com_distance = 0.2;  // m, from the proximal joint
  double inertia_com = 0.01;  // kg m^2

  void validate() const;
};

/// Planar 1- or 2-link limb. Links are ordered thigh, shank; a 1-DOF limb is a
/// shank pinned at the knee.
///
/// Angle convention (shared by every module): q[0] is the proximal link angle
/// from the downward vertical, q[1] is the distal link angle relative to the
/// proximal link. Gravity restores both toward zero.
struct LimbModel {
  int dof = 2;
  std::vector<LinkParams> links;
  double payload_mass = 0.0;  // kg, point mass at the middle of the last link
  Vec viscous_friction;       // N m s, per joint
  Vec coulomb_friction;       // N m, per joint
  double gravity = 9.81;

  void validate() const;

  /// Copy with a different payload.
  [[nodiscard]] LimbModel with_payload(double kg) const;

  /// Links after folding the payload into the last link (mass, com, and
  /// parallel-axis inertia).
  [[nodiscard]] std::vector<LinkParams> effective_links() const;

  /// Exoskeleton defaults; friction from the identified hardware values.
  static LimbModel robot_default(int dof);

  /// Anthropometric human leg built from total body mass. Friction is zero.
  static LimbModel human_from_body_mass(int dof, double body_mass, double height = 1.75);
};

struct JointState {
  Vec q;   // rad
  Vec qd;  // rad/s

  JointState() = default;
  JointState(Vec q_, Vec qd_) : q(std::move(q_)), qd(std::move(qd_)) {}
  static JointState zero(int dof) { return {Vec::Zero(dof), Vec::Zero(dof)}; }

  [[nodiscard]] int dof() const { return static_cast<int>(q.size()); }
  /// Stacked (q, qd).
  [[nodiscard]] Vec stacked() const;
  static JointState from_stacked(const Vec& x);
};

struct DynamicsTerms {
  Mat M;  // inertia
  Mat C;  // Coriolis/centrifugal, Christoffel convention (Mdot - 2C skew)
  Vec G;  // gravity torque
};

DynamicsTerms compute_terms(const LimbModel& model, const JointState& state);

/// Total kinetic plus potential energy (potential zero at the pivot height).
double mechanical_energy(const LimbModel& model, const JointState& state);

/// Joint accelerations of the exoskeleton:
///   M qdd + C qd + G + kf1 qd + kf2 sign(qd) + D = T_R + T_int
/// with sign(0) = 0.
Vec forward_dynamics_robot(const LimbModel& model, const JointState& state, const Vec& T_R,
                           const Vec& T_int, const Vec& D);

/// Joint accelerations of the human leg: M qdd + C qd + G = T_H - T_int.
Vec forward_dynamics_human(const LimbModel& model, const JointState& state, const Vec& T_H,
                           const Vec& T_int);

}  // namespace exo
