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
#include <exo/nmpc.hpp>
#include <exo/rk4.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace exo {

void NmpcConfig::validate() const {
  if (N_c < 1 || N_c > N_p) throw ConfigError(fmt::format("need 1 <= N_c <= N_p, got N_c={} N_p={}", N_c, N_p));
  if (r_d < 0.0 || r_t < 0.0) throw ConfigError("nmpc weights must be non-negative");
  if (!(dt > 0.0)) throw ConfigError("nmpc dt must be positive");
  if (!(T_max > 0.0) || !(dT_max > 0.0)) throw ConfigError("torque limits must be positive");
  if (objective_scale < 0.0) throw ConfigError("objective_scale must be non-negative");
}

double NmpcConfig::effective_objective_scale() const {
  if (objective_scale > 0.0) return objective_scale;
  return 1.0 / (dt * dt);
}

ControlPlan ControlPlan::shifted() const {
  ControlPlan out{Mat::Zero(dT.rows(), dT.cols())};
  if (dT.rows() > 1) out.dT.topRows(dT.rows() - 1) = dT.bottomRows(dT.rows() - 1);
  return out;
}

Vec ControlPlan::flatten() const {
  Vec x(dT.size());
  for (Eigen::Index j = 0; j < dT.rows(); ++j) x.segment(j * dT.cols(), dT.cols()) = dT.row(j).transpose();
  return x;
}

ControlPlan ControlPlan::unflatten(const Vec& x, int N_c, int dof) {
  ControlPlan p{Mat(N_c, dof)};
  for (int j = 0; j < N_c; ++j) p.dT.row(j) = x.segment(j * dof, dof).transpose();
  return p;
}

HorizonReference build_reference(const Vec& qH_hat, const Vec& qdH_hat, const NmpcConfig& cfg) {
  HorizonReference ref;
  ref.q.reserve(static_cast<std::size_t>(cfg.N_p));
  ref.qd.reserve(static_cast<std::size_t>(cfg.N_p));
  for (int j = 1; j <= cfg.N_p; ++j) {
    ref.q.push_back(qH_hat + (j * cfg.dt) * qdH_hat);
    ref.qd.push_back(qdH_hat);
  }
  return ref;
}

std::vector<JointState> predict_horizon(const LimbModel& model, const JointState& state, const Vec& T_prev,
                                        const ControlPlan& plan, const Vec& D, const NmpcConfig& cfg) {
  const int dof = model.dof;
  const Vec no_interaction = Vec::Zero(dof);
  LimbModel smooth = model;
  smooth.coulomb_friction.setZero();
  const Vec load = D + model.coulomb_friction.cwiseProduct(state.qd.unaryExpr([](double v) {
                     return static_cast<double>((v > 0.0) - (v < 0.0));
                   }));
  std::vector<JointState> out;
  out.reserve(static_cast<std::size_t>(cfg.N_p));
  Vec x = state.stacked();
  Vec torque = T_prev;
  for (int j = 1; j <= cfg.N_p; ++j) {
    if (j <= plan.dT.rows()) torque += plan.dT.row(j - 1).transpose();
    auto f = [&](const Vec& s) -> Vec {
      const JointState js = JointState::from_stacked(s);
      Vec dx(2 * dof);
      dx << js.qd, forward_dynamics_robot(smooth, js, torque, no_interaction, load);
      return dx;
    };
    x = rk4_step(f, x, cfg.dt);
    out.push_back(JointState::from_stacked(x));
  }
  return out;
}

double nmpc_cost(const std::vector<JointState>& predicted, const HorizonReference& reference,
                 const ControlPlan& plan, const NmpcConfig& cfg) {
  if (predicted.size() != reference.q.size() || predicted.size() != reference.qd.size()) {
    throw ConfigError("nmpc_cost: prediction and reference lengths differ");
  }
  double J = 0.0;
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    J += (predicted[j].q - reference.q[j]).squaredNorm();
    J += cfg.r_d * (predicted[j].qd - reference.qd[j]).squaredNorm();
  }
  J += cfg.r_t * plan.dT.squaredNorm();
  return J;
}

Vec nmpc_residuals(const std::vector<JointState>& predicted, const HorizonReference& reference,
                   const ControlPlan& plan, const NmpcConfig& cfg) {
  if (predicted.size() != reference.q.size() || predicted.size() != reference.qd.size()) {
    throw ConfigError("nmpc_residuals: prediction and reference lengths differ");
  }
  const auto dof = plan.dT.cols();
  const auto np = static_cast<Eigen::Index>(predicted.size());
  Vec r(2 * np * dof + plan.dT.size());
  const double wd = std::sqrt(cfg.r_d);
  for (Eigen::Index j = 0; j < np; ++j) {
    const auto& p = predicted[static_cast<std::size_t>(j)];
    r.segment(2 * j * dof, dof) = p.q - reference.q[static_cast<std::size_t>(j)];
    r.segment((2 * j + 1) * dof, dof) = wd * (p.qd - reference.qd[static_cast<std::size_t>(j)]);
  }
  r.tail(plan.dT.size()) = std::sqrt(cfg.r_t) * plan.flatten();
  return r;
}

PlanConstraints plan_constraints(const Vec& T_prev, const NmpcConfig& cfg) {
  const auto dof = T_prev.size();
  const auto n = cfg.N_c * dof;
  PlanConstraints c;
  c.lo = Vec::Constant(n, -cfg.dT_max);
  c.hi = Vec::Constant(n, cfg.dT_max);
  // Cumulative torque T_prev + sum_{i<=j} dT_i within +-T_max, both sides.
  c.A = Mat::Zero(2 * n, n);
  c.b = Vec(2 * n);
  for (int j = 0; j < cfg.N_c; ++j) {
    for (Eigen::Index d = 0; d < dof; ++d) {
      const Eigen::Index row = 2 * (j * dof + d);
      for (int i = 0; i <= j; ++i) {
        c.A(row, i * dof + d) = 1.0;
        c.A(row + 1, i * dof + d) = -1.0;
      }
      c.b[row] = cfg.T_max - T_prev[d];
      c.b[row + 1] = cfg.T_max + T_prev[d];
    }
  }
  return c;
}

NmpcStepResult nmpc_step(const JointState& state, const Vec& qH_hat, const Vec& qdH_hat, const Vec& T_prev,
                         const Vec& D, const LimbModel& model, const NmpcConfig& cfg, SqpSolver& solver,
                         const ControlPlan& warm) {
  const int dof = model.dof;
  if (T_prev.size() != dof || qH_hat.size() != dof || qdH_hat.size() != dof || D.size() != dof) {
    throw ConfigError("nmpc_step: input dims must equal model dof");
  }
  if ((T_prev.array().abs() > cfg.T_max + 1e-9).any()) throw ConfigError("nmpc_step: T_prev outside torque limits");

  const HorizonReference ref = build_reference(qH_hat, qdH_hat, cfg);
  const double scale = cfg.effective_objective_scale();
  const PlanConstraints pc = plan_constraints(T_prev, cfg);

  NlpProblem problem;
  problem.n = cfg.N_c * dof;
  problem.objective = [&](const Vec& x) -> double {
    const ControlPlan plan = ControlPlan::unflatten(x, cfg.N_c, dof);
    try {
      const auto pred = predict_horizon(model, state, T_prev, plan, D, cfg);
      const double J = nmpc_cost(pred, ref, plan, cfg);
      return std::isfinite(J) ? scale * J : kInf;
    } catch (const NumericalError&) {
      return kInf;
    }
  };
  // Gauss-Newton starting Hessian from a forward-difference residual Jacobian.
  problem.initial_hessian = [&](const Vec& x) -> Mat {
    const auto residuals = [&](const Vec& v) {
      const ControlPlan plan = ControlPlan::unflatten(v, cfg.N_c, dof);
      return nmpc_residuals(predict_horizon(model, state, T_prev, plan, D, cfg), ref, plan, cfg);
    };
    try {
      const Vec r0 = residuals(x);
      Mat J(r0.size(), x.size());
      Vec xp = x;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = cfg.sqp.fd_step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        J.col(i) = (residuals(xp) - r0) / h;
        xp[i] = x[i];
      }
      return 2.0 * scale * J.transpose() * J;
    } catch (const NumericalError&) {
      return Mat();
    }
  };
  problem.A = pc.A;
  problem.b = pc.b;
  problem.lo = pc.lo;
  problem.hi = pc.hi;

  Vec x0 = Vec::Zero(problem.n);
  if (warm.dT.rows() == cfg.N_c && warm.dT.cols() == dof) {
    // Pull the shifted plan back inside the cumulative limits so the solver
    // starts feasible.
    ControlPlan start = warm;
    Vec torque = T_prev;
    for (int j = 0; j < cfg.N_c; ++j) {
      for (int d = 0; d < dof; ++d) {
        double inc = std::clamp(start.dT(j, d), -cfg.dT_max, cfg.dT_max);
        inc = std::clamp(inc, -cfg.T_max - torque[d], cfg.T_max - torque[d]);
        start.dT(j, d) = inc;
        torque[d] += inc;
      }
    }
    x0 = start.flatten();
  }

  NmpcStepResult out;
  out.sqp = solver.solve(problem, x0);
  out.plan = ControlPlan::unflatten(out.sqp.x, cfg.N_c, dof);
  // Absorb rounding at an active torque limit.
  out.T_applied = (T_prev + out.plan.dT.row(0).transpose()).cwiseMax(-cfg.T_max).cwiseMin(cfg.T_max);
  return out;
}

NmpcController::NmpcController(LimbModel model, NmpcConfig cfg)
    : model_(std::move(model)), cfg_(cfg), solver_(cfg.sqp) {
  model_.validate();
  cfg_.validate();
  previous_ = ControlPlan::zero(cfg_.N_c, model_.dof);
}

NmpcStepResult NmpcController::step(const JointState& state, const Vec& qH_hat, const Vec& qdH_hat,
                                    const Vec& T_prev) {
  return step(state, qH_hat, qdH_hat, T_prev, Vec::Zero(model_.dof));
}

NmpcStepResult NmpcController::step(const JointState& state, const Vec& qH_hat, const Vec& qdH_hat,
                                    const Vec& T_prev, const Vec& D) {
  const ControlPlan warm =
      cfg_.warm_start && has_previous_ ? previous_.shifted() : ControlPlan::zero(cfg_.N_c, model_.dof);
  NmpcStepResult r = nmpc_step(state, qH_hat, qdH_hat, T_prev, D, model_, cfg_, solver_, warm);
  if (r.sqp.status != SqpStatus::converged) ++warnings_;
  previous_ = r.plan;
  has_previous_ = true;
  return r;
}

void NmpcController::reset() {
  previous_ = ControlPlan::zero(cfg_.N_c, model_.dof);
  has_previous_ = false;
  warnings_ = 0;
}

}  // namespace exo
