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
#include <exo/rk4.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace exo {

void EkfConfig::validate() const {
  if (!(q_pos >= 0.0 && q_vel >= 0.0 && q_dist >= 0.0)) throw ConfigError("EKF process noise must be non-negative");
  if (!(r_pos > 0.0 && r_vel > 0.0)) throw ConfigError("EKF measurement noise must be positive");
  if (!(p0 > 0.0)) throw ConfigError("EKF initial covariance must be positive");
  if (!(jacobian_step > 0.0)) throw ConfigError("EKF jacobian step must be positive");
}

EkfState EkfState::initial(const Vec& y0, int dof, const EkfConfig& cfg) {
  if (y0.size() != 2 * dof) throw ConfigError("EKF initial measurement must have 2*dof entries");
  EkfState s;
  s.x = Vec::Zero(3 * dof);
  s.x.head(2 * dof) = y0;
  s.P = cfg.p0 * Mat::Identity(3 * dof, 3 * dof);
  Vec q(3 * dof);
  q << Vec::Constant(dof, cfg.q_pos), Vec::Constant(dof, cfg.q_vel), Vec::Constant(dof, cfg.q_dist);
  s.Q = q.asDiagonal();
  Vec r(2 * dof);
  r << Vec::Constant(dof, cfg.r_pos), Vec::Constant(dof, cfg.r_vel);
  s.R = r.asDiagonal();
  s.S = s.R;
  return s;
}

namespace {

Vec transition(const LimbModel& model, const Vec& x, const Vec& T, const Vec& T_int, double dt) {
  const int dof = model.dof;
  const Vec D = x.tail(dof);
  auto f = [&](const Vec& s) -> Vec {
    const JointState js = JointState::from_stacked(s);
    Vec dx(2 * dof);
    dx << js.qd, forward_dynamics_robot(model, js, T, T_int, D);
    return dx;
  };
  Vec out = x;
  out.head(2 * dof) = rk4_step(f, Vec(x.head(2 * dof)), dt);
  return out;
}

// Symmetrize and lift eigenvalues to at least floor. Returns true if the
// matrix needed repair beyond symmetrization.
bool repair_covariance(Mat& P, double floor) {
  P = 0.5 * (P + P.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat> eig(P);
  if (eig.info() != Eigen::Success) return false;
  if (eig.eigenvalues().minCoeff() >= floor) return false;
  const Vec lifted = eig.eigenvalues().cwiseMax(floor);
  P = eig.eigenvectors() * lifted.asDiagonal() * eig.eigenvectors().transpose();
  P = 0.5 * (P + P.transpose());
  return true;
}

}  // namespace

EkfUpdate ekf_step(const LimbModel& model, EkfState& ekf, const Vec& T_applied, const Vec& T_int, const Vec& y,
                   double dt, const EkfConfig& cfg) {
  const int dof = model.dof;
  const int nx = 3 * dof;
  const int ny = 2 * dof;
  if (ekf.x.size() != nx) throw ConfigError("ekf_step: filter state does not match model dof");
  if (y.size() != ny) throw ConfigError("ekf_step: measurement must have 2*dof entries");

  const Vec x_pred = transition(model, ekf.x, T_applied, T_int, dt);

  // Coulomb friction is piecewise constant in qd; its derivative is zero almost
  // everywhere, and a difference quotient straddling qd = 0 would blow up.
  LimbModel smooth = model;
  smooth.coulomb_friction.setZero();
  Mat F(nx, nx);
  Vec xp = ekf.x;
  for (int i = 0; i < nx; ++i) {
    const double h = cfg.jacobian_step * std::max(1.0, std::abs(ekf.x[i]));
    xp[i] = ekf.x[i] + h;
    const Vec fp = transition(smooth, xp, T_applied, T_int, dt);
    xp[i] = ekf.x[i] - h;
    const Vec fm = transition(smooth, xp, T_applied, T_int, dt);
    xp[i] = ekf.x[i];
    F.col(i) = (fp - fm) / (2.0 * h);
  }

  Mat P_pred = F * ekf.P * F.transpose() + ekf.Q;
  P_pred = 0.5 * (P_pred + P_pred.transpose());

  // Measurement picks (q, qd) out of the augmented state.
  const Vec innovation = y - x_pred.head(ny);
  Mat S = P_pred.topLeftCorner(ny, ny) + ekf.R;
  S = 0.5 * (S + S.transpose());
  const Eigen::LLT<Mat> S_llt(S);
  if (S_llt.info() != Eigen::Success) throw NumericalError("ekf_step: innovation covariance not positive definite");
  const Mat PHt = P_pred.leftCols(ny);
  const Mat K = S_llt.solve(PHt.transpose()).transpose();

  ekf.x = x_pred + K * innovation;
  Mat IKH = Mat::Identity(nx, nx);
  IKH.leftCols(ny) -= K;
  ekf.P = IKH * P_pred * IKH.transpose() + K * ekf.R * K.transpose();
  if (repair_covariance(ekf.P, 1e-10)) ++ekf.covariance_repairs;
  ekf.S = S;
  return {innovation, S};
}

Vec floor_and_normalize(const Vec& mu, double floor) {
  const auto n = mu.size();
  if (n == 0) return mu;
  if (floor * static_cast<double>(n) >= 1.0) return Vec::Constant(n, 1.0 / static_cast<double>(n));
  Vec out = mu.cwiseMax(0.0);
  std::vector<char> pinned(static_cast<std::size_t>(n), 0);
  // Pin entries at the floor and rescale the rest; rescaling can push another
  // entry under the floor, so repeat until stable (at most n rounds).
  for (Eigen::Index round = 0; round <= n; ++round) {
    double free_sum = 0.0;
    double pinned_mass = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pinned[static_cast<std::size_t>(i)]) {
        pinned_mass += floor;
      } else {
        free_sum += out[i];
      }
    }
    const double target = 1.0 - pinned_mass;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pinned[static_cast<std::size_t>(i)]) {
        out[i] = floor;
        continue;
      }
      out[i] = free_sum > 0.0 ? out[i] * target / free_sum : target;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned[static_cast<std::size_t>(i)] && out[i] < floor) {
        pinned[static_cast<std::size_t>(i)] = 1;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return out;
}

ProbabilityUpdate update_probabilities(const Vec& prior, const std::vector<Vec>& innovations,
                                       const std::vector<Mat>& S, double c1, double floor) {
  const auto n = prior.size();
  if (static_cast<std::size_t>(n) != innovations.size() || innovations.size() != S.size()) {
    throw ConfigError("update_probabilities: one innovation and covariance per scenario required");
  }
  if (!(c1 > 0.0)) throw ConfigError("update_probabilities: c1 must be positive");

  // Work in log space so sharp likelihoods (large c1) do not underflow.
  Vec log_w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec& v = innovations[static_cast<std::size_t>(i)];
    const Mat cS = c1 * S[static_cast<std::size_t>(i)];
    const Eigen::LLT<Mat> llt(cS);
    if (llt.info() != Eigen::Success || prior[i] <= 0.0) {
      log_w[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    // Mahalanobis term uses c1 v S^-1 v' as written, and |c1 S| in the normalizer.
    const double maha = c1 * v.dot(S[static_cast<std::size_t>(i)].ldlt().solve(v));
    const Mat L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    const double dim = static_cast<double>(v.size());
    log_w[i] = -0.5 * std::abs(maha) - 0.5 * (dim * std::log(2.0 * std::numbers::pi) + log_det) + std::log(prior[i]);
  }

  ProbabilityUpdate out;
  const double top = log_w.maxCoeff();
  if (!std::isfinite(top)) {
    out.underflow = true;
    out.mu = floor_and_normalize(prior, floor);
    return out;
  }
  Vec w = (log_w.array() - top).exp();
  w /= w.sum();
  out.mu = floor_and_normalize(w, floor);
  return out;
}

}  // namespace exo
