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
#include <exo/dynamics.hpp>

#include <fmt/format.h>

#include <cmath>

namespace exo {

namespace {

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

void check_state(const LimbModel& model, const JointState& state) {
  if (state.q.size() != model.dof || state.qd.size() != model.dof) {
    throw ConfigError(fmt::format("joint state has dims ({}, {}) but model dof is {}",
                                  state.q.size(), state.qd.size(), model.dof));
  }
}

void check_vec(const Vec& v, int dof, const char* name) {
  if (v.size() != dof) {
    throw ConfigError(fmt::format("{} has dim {} but model dof is {}", name, v.size(), dof));
  }
}

Vec solve_inertia(const Mat& M, const Vec& rhs) {
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError("inertia matrix is not positive definite");
  return llt.solve(rhs);
}

}  // namespace

void LinkParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("link mass must be positive");
  if (!(length > 0.0)) throw ConfigError("link length must be positive");
  if (!(com_distance >= 0.0 && com_distance <= length)) {
    throw ConfigError("link com distance must lie within [0, length]");
  }
  if (!(inertia_com >= 0.0)) throw ConfigError("link inertia must be non-negative");
}

void LimbModel::validate() const {
  if (dof != 1 && dof != 2) throw ConfigError(fmt::format("dof must be 1 or 2, got {}", dof));
  if (static_cast<int>(links.size()) != dof) throw ConfigError("number of links must equal dof");
  for (const auto& l : links) l.validate();
  if (!(payload_mass >= 0.0)) throw ConfigError("payload mass must be non-negative");
  check_vec(viscous_friction, dof, "viscous friction");
  check_vec(coulomb_friction, dof, "coulomb friction");
  if ((viscous_friction.array() < 0.0).any() || (coulomb_friction.array() < 0.0).any()) {
    throw ConfigError("friction coefficients must be non-negative");
  }
}

LimbModel LimbModel::with_payload(double kg) const {
  LimbModel out = *this;
  out.payload_mass = kg;
  return out;
}

std::vector<LinkParams> LimbModel::effective_links() const {
  std::vector<LinkParams> out = links;
  if (payload_mass <= 0.0 || out.empty()) return out;
  LinkParams& last = out.back();
  const double at = 0.5 * last.length;
  const double m = last.mass + payload_mass;
  const double com = (last.mass * last.com_distance + payload_mass * at) / m;
  const double d_link = last.com_distance - com;
  const double d_load = at - com;
  last.inertia_com = last.inertia_com + last.mass * d_link * d_link + payload_mass * d_load * d_load;
  last.mass = m;
  last.com_distance = com;
  return out;
}

LimbModel LimbModel::robot_default(int dof) {
  const LinkParams thigh{2.5, 0.40, 0.20, 0.035};
  const LinkParams shank{2.0, 0.40, 0.18, 0.030};
  LimbModel m;
  m.dof = dof;
  if (dof == 2) {
    m.links = {thigh, shank};
  } else if (dof == 1) {
    m.links = {shank};
  } else {
    throw ConfigError(fmt::format("dof must be 1 or 2, got {}", dof));
  }
  m.viscous_friction = Vec::Constant(dof, 0.000899);
  m.coulomb_friction = Vec::Constant(dof, 0.05048);
  return m;
}

LimbModel LimbModel::human_from_body_mass(int dof, double body_mass, double height) {
  if (!(body_mass > 0.0) || !(height > 0.0)) throw ConfigError("body mass and height must be positive");
  auto segment = [](double mass, double length, double com_frac, double gyration_frac) {
    const double rg = gyration_frac * length;
    return LinkParams{mass, length, com_frac * length, mass * rg * rg};
  };
  const LinkParams thigh = segment(0.100 * body_mass, 0.245 * height, 0.433, 0.323);
  const LinkParams shank = segment(0.061 * body_mass, 0.246 * height, 0.434, 0.302);
  LimbModel m;
  m.dof = dof;
  if (dof == 2) {
    m.links = {thigh, shank};
  } else if (dof == 1) {
    m.links = {shank};
  } else {
    throw ConfigError(fmt::format("dof must be 1 or 2, got {}", dof));
  }
  m.viscous_friction = Vec::Zero(dof);
  m.coulomb_friction = Vec::Zero(dof);
  return m;
}

Vec JointState::stacked() const {
  Vec x(q.size() + qd.size());
  x << q, qd;
  return x;
}

JointState JointState::from_stacked(const Vec& x) {
  const Eigen::Index n = x.size() / 2;
  return {x.head(n), x.tail(n)};
}

DynamicsTerms compute_terms(const LimbModel& model, const JointState& state) {
  check_state(model, state);
  const auto links = model.effective_links();
  const double g = model.gravity;
  DynamicsTerms out;

  if (model.dof == 1) {
    const LinkParams& s = links[0];
    out.M = Mat::Constant(1, 1, s.inertia_com + s.mass * s.com_distance * s.com_distance);
    out.C = Mat::Zero(1, 1);
    out.G = Vec::Constant(1, s.mass * g * s.com_distance * std::sin(state.q[0]));
    return out;
  }

  const LinkParams& a = links[0];
  const LinkParams& b = links[1];
  const double q1 = state.q[0];
  const double q2 = state.q[1];
  const double qd1 = state.qd[0];
  const double qd2 = state.qd[1];
  const double c2 = std::cos(q2);
  const double s2 = std::sin(q2);

  const double shank = b.inertia_com + b.mass * b.com_distance * b.com_distance;
  const double cross = b.mass * a.length * b.com_distance;

  out.M.resize(2, 2);
  out.M(0, 0) = a.inertia_com + a.mass * a.com_distance * a.com_distance + shank +
                b.mass * a.length * a.length + 2.0 * cross * c2;
  out.M(0, 1) = shank + cross * c2;
  out.M(1, 0) = out.M(0, 1);
  out.M(1, 1) = shank;

  const double h = -cross * s2;
  out.C.resize(2, 2);
  out.C(0, 0) = h * qd2;
  out.C(0, 1) = h * (qd1 + qd2);
  out.C(1, 0) = -h * qd1;
  out.C(1, 1) = 0.0;

  out.G.resize(2);
  const double s12 = std::sin(q1 + q2);
  out.G[0] = (a.mass * a.com_distance + b.mass * a.length) * g * std::sin(q1) +
             b.mass * b.com_distance * g * s12;
  out.G[1] = b.mass * b.com_distance * g * s12;
  return out;
}

double mechanical_energy(const LimbModel& model, const JointState& state) {
  const DynamicsTerms terms = compute_terms(model, state);
  const double kinetic = 0.5 * state.qd.dot(terms.M * state.qd);
  const auto links = model.effective_links();
  const double g = model.gravity;
  double potential = 0.0;
  if (model.dof == 1) {
    potential = -links[0].mass * g * links[0].com_distance * std::cos(state.q[0]);
  } else {
    const double q1 = state.q[0];
    const double q12 = state.q[0] + state.q[1];
    potential = -links[0].mass * g * links[0].com_distance * std::cos(q1) -
                links[1].mass * g * (links[0].length * std::cos(q1) + links[1].com_distance * std::cos(q12));
  }
  return kinetic + potential;
}

Vec forward_dynamics_robot(const LimbModel& model, const JointState& state, const Vec& T_R,
                           const Vec& T_int, const Vec& D) {
  const DynamicsTerms terms = compute_terms(model, state);
  check_vec(T_R, model.dof, "robot torque");
  check_vec(T_int, model.dof, "interaction torque");
  check_vec(D, model.dof, "disturbance");
  Vec rhs = T_R + T_int - terms.C * state.qd - terms.G - D;
  for (int i = 0; i < model.dof; ++i) {
    rhs[i] -= model.viscous_friction[i] * state.qd[i] + model.coulomb_friction[i] * sgn(state.qd[i]);
  }
  return solve_inertia(terms.M, rhs);
}

Vec forward_dynamics_human(const LimbModel& model, const JointState& state, const Vec& T_H,
                           const Vec& T_int) {
  const DynamicsTerms terms = compute_terms(model, state);
  check_vec(T_H, model.dof, "human torque");
  check_vec(T_int, model.dof, "interaction torque");
  return solve_inertia(terms.M, T_H - T_int - terms.C * state.qd - terms.G);
}

}  // namespace exo
