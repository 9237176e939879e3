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
#include <exo/msnmpc.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <thread>

namespace exo {

void MsSettings::validate() const {
  if (hypotheses.empty()) throw ConfigError("need at least one scenario hypothesis");
  for (double h : hypotheses) {
    if (!(h >= 0.0)) throw ConfigError(fmt::format("payload hypothesis must be non-negative, got {}", h));
  }
  if (!(c1 > 0.0)) throw ConfigError("c1 must be positive");
  if (!(mu_floor >= 0.0 && mu_floor * static_cast<double>(hypotheses.size()) < 1.0)) {
    throw ConfigError("mu_floor must be non-negative and leave room on the simplex");
  }
  if (threads < 1) throw ConfigError("threads must be at least 1");
  nmpc.validate();
  ekf.validate();
}

Vec blend_increments(const Vec& T_prev, const Vec& mu, const std::vector<Vec>& first_increments,
                     const NmpcConfig& cfg, bool* clamped) {
  if (static_cast<std::size_t>(mu.size()) != first_increments.size()) {
    throw ConfigError("blend_increments: one increment per scenario required");
  }
  Vec inc = Vec::Zero(T_prev.size());
  for (std::size_t i = 0; i < first_increments.size(); ++i) inc += mu[static_cast<Eigen::Index>(i)] * first_increments[i];
  const Vec inc_c = inc.cwiseMax(-cfg.dT_max).cwiseMin(cfg.dT_max);
  const Vec T = (T_prev + inc_c).cwiseMax(-cfg.T_max).cwiseMin(cfg.T_max);
  if (clamped != nullptr) *clamped = (T - (T_prev + inc)).lpNorm<Eigen::Infinity>() > 0.0;
  return T;
}

MultiStageNmpc::MultiStageNmpc(const LimbModel& nominal, MsSettings settings) : settings_(std::move(settings)) {
  settings_.validate();
  nominal.validate();
  const double uniform = 1.0 / static_cast<double>(settings_.hypotheses.size());
  for (double h : settings_.hypotheses) {
    Scenario s;
    s.payload = h;
    s.model = nominal.with_payload(h);
    s.mu = uniform;
    s.plan = ControlPlan::zero(settings_.nmpc.N_c, nominal.dof);
    scenarios_.push_back(std::move(s));
    solvers_.emplace_back(settings_.nmpc.sqp);
  }
  last_T_int_ = Vec::Zero(nominal.dof);
}

void MultiStageNmpc::solve_scenario(std::size_t i, const JointState& state, const Vec& qH_hat, const Vec& qdH_hat,
                                    const Vec& T_prev, NmpcStepResult& out) {
  const Scenario& sc = scenarios_[i];
  const NmpcConfig& cfg = settings_.nmpc;
  const int dof = sc.model.dof;
  const ControlPlan warm = cfg.warm_start && sc.has_plan ? sc.plan.shifted() : ControlPlan::zero(cfg.N_c, dof);
  const Vec D = settings_.use_disturbance_estimate ? sc.ekf.disturbance() : Vec::Zero(dof);
  out = nmpc_step(state, qH_hat, qdH_hat, T_prev, D, sc.model, cfg, solvers_[i], warm);
}

MsStepResult MultiStageNmpc::step(const Vec& y, const Vec& T_int_meas, const Vec& qH_hat, const Vec& qdH_hat,
                                  const Vec& T_prev) {
  const int dof = scenarios_.front().model.dof;
  if (y.size() != 2 * dof) throw ConfigError("msnmpc: measurement must have 2*dof entries");
  const std::size_t n = scenarios_.size();
  MsStepResult out;

  if (!initialized_) {
    for (auto& sc : scenarios_) sc.ekf = EkfState::initial(y, dof, settings_.ekf);
    initialized_ = true;
  } else {
    std::vector<Vec> innovations;
    std::vector<Mat> covariances;
    Vec prior(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      Scenario& sc = scenarios_[i];
      const EkfUpdate u = ekf_step(sc.model, sc.ekf, T_prev, last_T_int_, y, settings_.nmpc.dt, settings_.ekf);
      innovations.push_back(u.innovation);
      covariances.push_back(u.S);
      prior[static_cast<Eigen::Index>(i)] = sc.mu;
    }
    const ProbabilityUpdate pu = update_probabilities(prior, innovations, covariances, settings_.c1, settings_.mu_floor);
    if (pu.underflow) {
      ++underflow_events_;
      out.underflow = true;
    }
    for (std::size_t i = 0; i < n; ++i) scenarios_[i].mu = pu.mu[static_cast<Eigen::Index>(i)];
  }
  last_T_int_ = T_int_meas;

  const JointState state = JointState::from_stacked(y);
  std::vector<NmpcStepResult> solved(n);
  const auto workers = static_cast<std::size_t>(std::min<int>(settings_.threads, static_cast<int>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) solve_scenario(i, state, qH_hat, qdH_hat, T_prev, solved[i]);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) solve_scenario(i, state, qH_hat, qdH_hat, T_prev, solved[i]);
      });
    }
  }

  out.mu = Vec(static_cast<Eigen::Index>(n));
  std::vector<Vec> first;
  for (std::size_t i = 0; i < n; ++i) {
    Scenario& sc = scenarios_[i];
    sc.plan = solved[i].plan;
    sc.has_plan = true;
    if (solved[i].sqp.status != SqpStatus::converged) ++warnings_;
    out.mu[static_cast<Eigen::Index>(i)] = sc.mu;
    first.push_back(solved[i].plan.dT.row(0).transpose());
    out.plans.push_back(solved[i].plan);
    out.sqp.push_back(std::move(solved[i].sqp));
    out.D_hat.push_back(sc.ekf.disturbance());
  }
  out.T_applied = blend_increments(T_prev, out.mu, first, settings_.nmpc, &out.clamped);
  out.blended_increment = out.T_applied - T_prev;
  return out;
}

}  // namespace exo
