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
#include <exo/simulation.hpp>
#include <exo/rk4.hpp>

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <numbers>

namespace exo {

UncertaintySample disturbance_models(double t, const UncertaintyFlags& flags) {
  constexpr double pi = std::numbers::pi;
  UncertaintySample s;
  if (flags.mass_wobble) s.m_dis = 0.05 * std::sin(t) + 0.01 * std::sin(100.0 * t + pi / 4.0);
  if (flags.disturbance) s.D = 0.1 * std::sin(t) + 0.05 * std::sin(100.0 * t + pi / 2.0);
  if (flags.sensor_noise) {
    s.noise_qd = 1e-4 * std::sin(100.0 * t);
    s.noise_F = 1e-3 * std::sin(100.0 * t);
  }
  return s;
}

SensorFilter::SensorFilter(std::size_t window) : window_(window) {
  if (window_ == 0) throw ConfigError("sensor filter window must be at least 1");
}

Vec SensorFilter::push(const Vec& sample) {
  if (samples_.empty()) {
    samples_.assign(window_, sample);
  } else {
    samples_.pop_front();
    samples_.push_back(sample);
  }
  return value();
}

Vec SensorFilter::value() const {
  if (samples_.empty()) throw ConfigError("sensor filter has no samples");
  Vec sum = Vec::Zero(samples_.front().size());
  for (const Vec& s : samples_) sum += s;
  return sum / static_cast<double>(samples_.size());
}

namespace {

LimbModel plant_robot(const SimConfig& cfg, double payload, double m_dis) {
  LimbModel m = cfg.robot.with_payload(payload);
  for (auto& l : m.links) l.mass += m_dis;
  return m;
}

Vec blended(const std::vector<Vec>& values, const Vec& mu) {
  Vec out = Vec::Zero(values.front().size());
  for (std::size_t i = 0; i < values.size(); ++i) out += mu[static_cast<Eigen::Index>(i)] * values[i];
  return out;
}

}  // namespace

SimLog run_simulation(const SimConfig& cfg, ControllerKind kind, const PlantOverrides& overrides) {
  cfg.validate();
  if (kind == ControllerKind::both) throw ConfigError("run_simulation runs a single controller");
  const int dof = cfg.dof;
  const double dt = cfg.dt;
  const int steps = cfg.steps();

  SimLog log;
  log.controller = kind;
  log.dof = dof;
  log.rows.reserve(static_cast<std::size_t>(steps) + 1);

  // Plant states start on the desired trajectory, robot aligned with the human.
  const TrajectorySample start = reference_trajectory(cfg.human.profile, 0.0);
  Vec xH(2 * dof);
  xH << start.q, start.qd;
  Vec xR = xH;

  // Controller side. It owns the nominal robot model only.
  std::optional<NmpcController> nmpc;
  std::optional<MultiStageNmpc> ms;
  if (kind == ControllerKind::nmpc) {
    nmpc.emplace(cfg.robot.with_payload(cfg.nmpc_model_payload), cfg.ms.nmpc);
  } else {
    MsSettings s = cfg.ms;
    s.threads = cfg.threads;
    ms.emplace(cfg.robot, s);
    log.scenarios = static_cast<int>(s.hypotheses.size());
  }
  Vec T_prev = compute_terms(cfg.robot, JointState::from_stacked(xR)).G;
  T_prev = T_prev.cwiseMax(-cfg.ms.nmpc.T_max).cwiseMin(cfg.ms.nmpc.T_max);

  SensorFilter qd_filter(static_cast<std::size_t>(cfg.filter_window));
  SensorFilter force_filter(static_cast<std::size_t>(cfg.filter_window));

  // Velocity and force sensors sample sensor_substeps times per control
  // period; the filters average the most recent samples.
  const auto sample_sensors = [&](double ts, const Vec& h, const Vec& r) {
    const UncertaintySample us = disturbance_models(ts, cfg.uncertainty);
    const JointState hs = JointState::from_stacked(h);
    const JointState rs = JointState::from_stacked(r);
    Vec F_meas = strap_forces(cfg.straps, hs, rs).as_vector(dof).array() + us.noise_F;
    if (cfg.force_saturation) F_meas = F_meas.cwiseMax(-*cfg.force_saturation).cwiseMin(*cfg.force_saturation);
    qd_filter.push(rs.qd.array() + us.noise_qd);
    force_filter.push(F_meas);
  };
  sample_sensors(0.0, xH, xR);
  const double h_sub = dt / cfg.sensor_substeps;

  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const UncertaintySample u = disturbance_models(t, cfg.uncertainty);
    const double payload = overrides.payload ? overrides.payload(t) : cfg.true_payload;
    const double body_mass = cfg.uncertainty.mass_ramp
                                 ? human_mass_at(t, cfg.duration, cfg.human.mass_start, cfg.human.mass_end)
                                 : cfg.human.mass_start;
    const LimbModel human_model = LimbModel::human_from_body_mass(dof, body_mass, cfg.human.height);
    const LimbModel robot_model = plant_robot(cfg, payload, u.m_dis);

    const JointState sH = JointState::from_stacked(xH);
    const JointState sR = JointState::from_stacked(xR);
    const InteractionForces F_true = strap_forces(cfg.straps, sH, sR);
    const Vec T_int_true = interaction_torques(cfg.straps, F_true, dof);

    // Encoders are exact; velocity and force channels come from the filters.
    const Vec qd_filt = qd_filter.value();
    const InteractionForces F_filt = InteractionForces::from_vector(force_filter.value());

    const JointState measured{sR.q, qd_filt};
    const HumanStateEstimate est = estimate_human_state(measured, F_filt, cfg.estimator);

    LogRow row;
    row.t = t;
    row.qH = sH.q;
    row.qdH = sH.qd;
    row.qR = sR.q;
    row.qdR = sR.qd;
    row.F1 = F_true.F1;
    row.F2 = F_true.F2;
    row.qH_hat = est.q;
    row.qdH_hat = est.qd;
    row.TH = human_torque(human_model, sH, reference_trajectory(cfg.human.profile, t), cfg.human.gains, T_int_true);

    if (k == steps) {
      // Final sample: states only, no further control action.
      row.TR = T_prev;
      if (ms) {
        row.mu = Vec(log.scenarios);
        for (int i = 0; i < log.scenarios; ++i) row.mu[i] = ms->scenarios()[static_cast<std::size_t>(i)].mu;
        for (const auto& sc : ms->scenarios()) row.D_hat.push_back(sc.ekf.disturbance());
        row.D_hat_blend = blended(row.D_hat, row.mu);
      } else {
        row.D_hat_blend = Vec::Zero(dof);
      }
      log.rows.push_back(std::move(row));
      break;
    }

    const auto t0 = std::chrono::steady_clock::now();
    Vec T_R;
    if (nmpc) {
      const NmpcStepResult r = nmpc->step(measured, est.q, est.qd, T_prev);
      T_R = r.T_applied;
      row.sqp_iterations = r.sqp.iterations;
      row.D_hat_blend = Vec::Zero(dof);
    } else {
      const Vec T_int_meas = interaction_torques(cfg.straps, F_filt, dof);
      const MsStepResult r = ms->step(measured.stacked(), T_int_meas, est.q, est.qd, T_prev);
      T_R = r.T_applied;
      row.mu = r.mu;
      row.D_hat = r.D_hat;
      row.D_hat_blend = blended(r.D_hat, r.mu);
      for (const auto& s : r.sqp) row.sqp_iterations += s.iterations;
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.step_ms = cfg.record_timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
    row.TR = T_R;
    log.rows.push_back(row);

    // Coupled plant step. The human brain runs continuously inside the
    // integrator, the robot torque is held over the step.
    const auto plant = [&](double tau, const Vec& x) -> Vec {
      const JointState h = JointState::from_stacked(x.head(2 * dof));
      const JointState r = JointState::from_stacked(x.tail(2 * dof));
      const Vec T_int = interaction_torques(cfg.straps, strap_forces(cfg.straps, h, r), dof);
      const Vec D = Vec::Constant(dof, disturbance_models(tau, cfg.uncertainty).D);
      const Vec T_H = human_torque(human_model, h, reference_trajectory(cfg.human.profile, tau), cfg.human.gains, T_int);
      Vec dx(4 * dof);
      dx << h.qd, forward_dynamics_human(human_model, h, T_H, T_int), r.qd,
          forward_dynamics_robot(robot_model, r, T_R, T_int, D);
      return dx;
    };
    Vec x(4 * dof);
    x << xH, xR;
    bool finite = true;
    try {
      for (int j = 0; j < cfg.sensor_substeps && finite; ++j) {
        const double ts = t + j * h_sub;
        x = rk4_step(plant, ts, x, h_sub);
        finite = x.allFinite();
        if (finite) sample_sensors(ts + h_sub, x.head(2 * dof), x.tail(2 * dof));
      }
    } catch (const NumericalError& e) {
      log.aborted = true;
      log.abort_reason = fmt::format("t={:.2f}: {}", t, e.what());
      break;
    }
    if (!finite) {
      log.aborted = true;
      log.abort_reason = fmt::format("t={:.2f}: non-finite plant state", t);
      break;
    }
    xH = x.head(2 * dof);
    xR = x.tail(2 * dof);
    T_prev = T_R;
  }

  log.solver_warnings = nmpc ? nmpc->warnings() : ms->warnings();
  log.probability_underflows = ms ? ms->underflow_events() : 0;
  return log;
}

std::vector<SimLog> run_configured(const SimConfig& config) {
  std::vector<SimLog> logs;
  if (config.controller == ControllerKind::nmpc || config.controller == ControllerKind::both) {
    logs.push_back(run_simulation(config, ControllerKind::nmpc));
  }
  if (config.controller == ControllerKind::msnmpc || config.controller == ControllerKind::both) {
    logs.push_back(run_simulation(config, ControllerKind::msnmpc));
  }
  return logs;
}

}  // namespace exo
