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
#include <exo/optimizer.hpp>

#include <algorithm>
#include <cmath>

namespace exo {

std::string_view to_string(SqpStatus s) {
  switch (s) {
    case SqpStatus::converged: return "converged";
    case SqpStatus::max_iterations: return "max_iterations";
    case SqpStatus::qp_infeasible: return "qp_infeasible";
    case SqpStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

void NlpProblem::validate() const {
  if (n <= 0) throw ConfigError("NlpProblem: n must be positive");
  if (!objective) throw ConfigError("NlpProblem: objective is required");
  if (A.rows() > 0 && A.cols() != n) throw ConfigError("NlpProblem: A must have n columns");
  if (A.rows() != b.size()) throw ConfigError("NlpProblem: A and b row counts differ");
  if (lo.size() != 0 && lo.size() != n) throw ConfigError("NlpProblem: lo must be empty or size n");
  if (hi.size() != 0 && hi.size() != n) throw ConfigError("NlpProblem: hi must be empty or size n");
  if (lo.size() == n && hi.size() == n && (lo.array() > hi.array()).any()) {
    throw ConfigError("NlpProblem: lo must not exceed hi");
  }
}

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec grad(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const double fp = f(xp);
    xp[i] = x[i] - step;
    const double fm = f(xp);
    xp[i] = x[i];
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

double gradient_check(const NlpProblem& problem, const Vec& x, double h) {
  if (!problem.gradient) throw ConfigError("gradient_check: problem has no analytic gradient");
  const Vec analytic = problem.gradient(x);
  const Vec numeric = finite_difference_gradient(problem.objective, x, h);
  const double scale = std::max(1.0, analytic.lpNorm<Eigen::Infinity>());
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

namespace {

double violation(const NlpProblem& p, const Vec& x) {
  double v = 0.0;
  if (p.A.rows() > 0) v += (p.A * x - p.b).cwiseMax(0.0).sum();
  if (p.lo.size() > 0) v += (p.lo - x).cwiseMax(0.0).sum();
  if (p.hi.size() > 0) v += (x - p.hi).cwiseMax(0.0).sum();
  return v;
}

bool positive_definite(const Mat& B) {
  const Eigen::LLT<Mat> llt(B);
  return llt.info() == Eigen::Success;
}

}  // namespace

SqpResult SqpSolver::solve(const NlpProblem& problem, const Vec& x0) {
  problem.validate();
  const int n = problem.n;
  if (x0.size() != n) throw ConfigError("sqp: x0 has the wrong dimension");
  if (!x0.allFinite()) throw ConfigError("sqp: x0 must be finite");

  const Vec lo = problem.lo.size() == n ? problem.lo : Vec::Constant(n, -kInf);
  const Vec hi = problem.hi.size() == n ? problem.hi : Vec::Constant(n, kInf);
  const Mat A = problem.A.rows() > 0 ? problem.A : Mat(0, n);

  auto grad = [&](const Vec& x) -> Vec {
    if (problem.gradient) return problem.gradient(x);
    return finite_difference_gradient(problem.objective, x, settings_.fd_step);
  };

  SqpResult res;
  Vec x = x0.cwiseMax(lo).cwiseMin(hi);
  double f = problem.objective(x);
  Vec g = grad(x);
  bool fresh_hessian = true;
  B_ = Mat::Identity(n, n);
  if (problem.initial_hessian) {
    Mat B0 = problem.initial_hessian(x);
    B0 = 0.5 * (B0 + B0.transpose());
    if (B0.rows() == n && B0.cols() == n && B0.allFinite() && positive_definite(B0)) {
      B_ = std::move(B0);
      fresh_hessian = false;
    }
  }
  double rho = 1.0;

  res.merit_history.push_back(f + rho * violation(problem, x));

  auto finish = [&](SqpStatus status, double kkt) {
    res.x = x;
    res.objective = f;
    res.kkt_residual = kkt;
    res.status = status;
    return res;
  };

  double kkt = kInf;
  int failed_searches = 0;
  while (true) {
    const Vec slack = A.rows() > 0 ? Vec(problem.b - A * x) : Vec(0);
    const QpResult qp = solve_qp(B_, g, A, slack, lo - x, hi - x, settings_.qp);
    if (qp.status == QpStatus::infeasible) return finish(SqpStatus::qp_infeasible, kkt);
    const Vec& d = qp.x;

    // KKT residual at x with the subproblem multipliers: stationarity,
    // primal violation, complementarity.
    Vec stationarity = g + qp.lambda_upper - qp.lambda_lower;
    if (A.rows() > 0) stationarity += A.transpose() * qp.lambda_ineq;
    double comp = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) comp = std::max(comp, std::abs(qp.lambda_ineq[i] * slack[i]));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::isfinite(hi[j])) comp = std::max(comp, std::abs(qp.lambda_upper[j] * (hi[j] - x[j])));
      if (std::isfinite(lo[j])) comp = std::max(comp, std::abs(qp.lambda_lower[j] * (x[j] - lo[j])));
    }
    kkt = std::max({stationarity.lpNorm<Eigen::Infinity>(), violation(problem, x), comp});

    if (kkt <= settings_.kkt_tolerance || d.lpNorm<Eigen::Infinity>() <= settings_.step_tolerance) {
      return finish(SqpStatus::converged, kkt);
    }
    if (res.iterations >= settings_.max_iterations) return finish(SqpStatus::max_iterations, kkt);

    double lam_max = 0.0;
    if (qp.lambda_ineq.size() > 0) lam_max = qp.lambda_ineq.lpNorm<Eigen::Infinity>();
    lam_max = std::max({lam_max, qp.lambda_lower.lpNorm<Eigen::Infinity>(), qp.lambda_upper.lpNorm<Eigen::Infinity>()});
    if (rho <= lam_max) rho = 1.5 * lam_max + 1e-8;

    const double viol = violation(problem, x);
    const double merit = f + rho * viol;
    const double slope = g.dot(d) - rho * viol;

    double alpha = 1.0;
    bool accepted = false;
    Vec x_new;
    double f_new = kInf;
    for (int k = 0; k <= settings_.max_backtracks; ++k) {
      x_new = (x + alpha * d).cwiseMax(lo).cwiseMin(hi);
      f_new = problem.objective(x_new);
      const double merit_new = f_new + rho * violation(problem, x_new);
      if (std::isfinite(merit_new)) {
        const bool armijo = slope < 0.0 ? merit_new <= merit + settings_.armijo * alpha * slope : merit_new <= merit;
        if (armijo) {
          accepted = true;
          res.merit_history.push_back(merit_new);
          break;
        }
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      if (alpha * d.lpNorm<Eigen::Infinity>() <= settings_.step_tolerance) return finish(SqpStatus::converged, kkt);
      ++failed_searches;
      if (fresh_hessian || failed_searches > 1) return finish(SqpStatus::line_search_failed, kkt);
      B_ = Mat::Identity(n, n);
      fresh_hessian = true;
      ++res.hessian_resets;
      continue;
    }
    failed_searches = 0;

    const Vec g_new = grad(x_new);
    const Vec s = x_new - x;
    const Vec y = g_new - g;
    x = x_new;
    f = f_new;
    g = g_new;
    ++res.iterations;

    const double sy = s.dot(y);
    if (fresh_hessian && sy > 0.0) {
      // Scale the identity to the observed curvature before the first update.
      B_ = (y.squaredNorm() / sy) * Mat::Identity(n, n);
    }
    fresh_hessian = false;

    // Powell-damped BFGS update.
    const Vec Bs = B_ * s;
    const double sBs = s.dot(Bs);
    if (sBs > 0.0 && std::isfinite(sBs)) {
      const double theta = sy >= 0.2 * sBs ? 1.0 : 0.8 * sBs / (sBs - sy);
      const Vec r = theta * y + (1.0 - theta) * Bs;
      const double sr = s.dot(r);
      if (sr > 0.0) {
        Mat B_next = B_ - (Bs * Bs.transpose()) / sBs + (r * r.transpose()) / sr;
        B_next = 0.5 * (B_next + B_next.transpose());
        if (B_next.allFinite() && positive_definite(B_next)) {
          B_ = std::move(B_next);
        } else {
          B_ = Mat::Identity(n, n);
          fresh_hessian = true;
          ++res.hessian_resets;
        }
      }
    }
  }
}

SqpResult sqp_solve(const NlpProblem& problem, const Vec& x0, const SqpSettings& settings) {
  SqpSolver solver(settings);
  return solver.solve(problem, x0);
}

}  // namespace exo
