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
#include <vector>

namespace exo {

namespace {

// Constraint rows c_i' x <= d_i. Bounds become unit rows so the active-set loop
// sees a single list.
struct RowSet {
  Mat C;
  Vec d;
  // source[i] = general row index (>= 0), or -(j+1) for an upper bound on x_j,
  // or -(n+j+1) for a lower bound on x_j.
  std::vector<int> source;
};

RowSet gather_rows(const Mat& A, const Vec& b, const Vec& lo, const Vec& hi) {
  const auto n = A.cols();
  std::vector<std::pair<Vec, double>> rows;
  std::vector<int> src;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    rows.emplace_back(A.row(i).transpose(), b[i]);
    src.push_back(static_cast<int>(i));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(hi[j])) {
      rows.emplace_back(Vec::Unit(n, j), hi[j]);
      src.push_back(-static_cast<int>(j) - 1);
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(lo[j])) {
      rows.emplace_back(-Vec::Unit(n, j), -lo[j]);
      src.push_back(-static_cast<int>(n + j) - 1);
    }
  }
  RowSet out;
  out.C.resize(static_cast<Eigen::Index>(rows.size()), n);
  out.d.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.C.row(static_cast<Eigen::Index>(i)) = rows[i].first.transpose();
    out.d[static_cast<Eigen::Index>(i)] = rows[i].second;
  }
  out.source = std::move(src);
  return out;
}

struct ActiveSetOutcome {
  Vec x;
  Vec lambda;  // one per row of C
  bool converged = false;
  int iterations = 0;
};

// Primal active-set for a strictly convex QP from a feasible x0
// (Nocedal & Wright, Algorithm 16.3). Equality subproblems go through the
// Schur complement of the Cholesky factor of H.
ActiveSetOutcome active_set(const Mat& H, const Vec& g, const Mat& C, const Vec& d, Vec x, int max_iter) {
  const auto m = C.rows();
  const Eigen::LLT<Mat> llt(H);
  const double scale = std::max({1.0, H.cwiseAbs().maxCoeff(), g.cwiseAbs().maxCoeff()});
  const double dual_tol = 1e-12 * scale;

  std::vector<Eigen::Index> working;
  std::vector<char> in_working(static_cast<std::size_t>(m), 0);
  ActiveSetOutcome out;
  out.lambda = Vec::Zero(m);

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const Vec gx = H * x + g;
    const auto w = static_cast<Eigen::Index>(working.size());
    Vec p;
    Vec lam_w = Vec::Zero(w);
    if (w == 0) {
      p = -llt.solve(gx);
    } else {
      Mat Cw(w, C.cols());
      for (Eigen::Index k = 0; k < w; ++k) Cw.row(k) = C.row(working[static_cast<std::size_t>(k)]);
      const Mat HinvCt = llt.solve(Cw.transpose());
      const Vec Hinvg = llt.solve(gx);
      const Mat schur = Cw * HinvCt;
      lam_w = schur.ldlt().solve(-Cw * Hinvg);
      p = -(Hinvg + HinvCt * lam_w);
    }

    if (p.lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      Eigen::Index drop = -1;
      double most_negative = -dual_tol;
      for (Eigen::Index k = 0; k < w; ++k) {
        if (lam_w[k] < most_negative) {
          most_negative = lam_w[k];
          drop = k;
        }
      }
      if (drop < 0) {
        out.lambda.setZero();
        for (Eigen::Index k = 0; k < w; ++k) {
          out.lambda[working[static_cast<std::size_t>(k)]] = std::max(0.0, lam_w[k]);
        }
        out.x = std::move(x);
        out.converged = true;
        return out;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double cp = C.row(i).dot(p);
      if (cp <= 1e-14 * p.lpNorm<Eigen::Infinity>()) continue;
      const double ratio = std::max(0.0, (d[i] - C.row(i).dot(x)) / cp);
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
      }
    }
    x += alpha * p;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = 1;
    }
  }
  out.x = std::move(x);
  return out;
}

Mat regularize(const Mat& H, double floor) {
  Mat S = 0.5 * (H + H.transpose());
  if (S.rows() == 0) return S;
  const Eigen::SelfAdjointEigenSolver<Mat> eig(S, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin < floor) S.diagonal().array() += floor - lmin;
  return S;
}

}  // namespace

QpResult solve_qp(const Mat& H, const Vec& g, const Mat& A, const Vec& b, const Vec& lo_in, const Vec& hi_in,
                  const QpSettings& settings) {
  const auto n = g.size();
  if (H.rows() != n || H.cols() != n) throw ConfigError("solve_qp: H must be n x n");
  if (A.rows() > 0 && A.cols() != n) throw ConfigError("solve_qp: A must have n columns");
  if (A.rows() != b.size()) throw ConfigError("solve_qp: A and b row counts differ");
  const Vec lo = lo_in.size() == 0 ? Vec::Constant(n, -kInf) : lo_in;
  const Vec hi = hi_in.size() == 0 ? Vec::Constant(n, kInf) : hi_in;
  if (lo.size() != n || hi.size() != n) throw ConfigError("solve_qp: bound dims must equal n");
  if ((lo.array() > hi.array()).any()) {
    QpResult r;
    r.x = Vec::Zero(n);
    r.status = QpStatus::infeasible;
    return r;
  }
  const Mat Aeff = A.rows() > 0 ? A : Mat(0, n);

  const Mat Hreg = regularize(H, settings.eigenvalue_floor);
  const RowSet rows = gather_rows(Aeff, b, lo, hi);
  const auto m = rows.C.rows();
  const int max_iter = settings.max_iterations > 0 ? settings.max_iterations
                                                   : static_cast<int>(50 * (n + m) + 100);
  const double feas_tol = settings.feasibility_tolerance;

  Vec x0 = Vec::Zero(n).cwiseMax(lo).cwiseMin(hi);
  int phase_iterations = 0;

  const Vec general_violation = Aeff * x0 - b;
  if (Aeff.rows() > 0 && general_violation.maxCoeff() > 0.0) {
    // Phase one: penalize slacks t >= 0 with A x - t <= b. Unit curvature on
    // (x, t) keeps the steps well scaled; the linear weight is large enough to
    // make the penalty exact for these small, well-posed instances.
    const auto mg = Aeff.rows();
    const auto np = n + mg;
    double weight = std::max(1.0, b.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::isfinite(lo[j])) weight = std::max(weight, std::abs(lo[j]));
      if (std::isfinite(hi[j])) weight = std::max(weight, std::abs(hi[j]));
    }
    weight *= 1e4;
    const Mat Hp = Mat::Identity(np, np);
    Vec gp = Vec::Zero(np);
    gp.tail(mg).setConstant(weight);
    Mat Ap(mg, np);
    Ap << Aeff, -Mat::Identity(mg, mg);
    Vec lop(np);
    Vec hip(np);
    lop << lo, Vec::Zero(mg);
    hip << hi, Vec::Constant(mg, kInf);
    const RowSet prow = gather_rows(Ap, b, lop, hip);
    Vec start(np);
    start << x0, general_violation.cwiseMax(0.0);
    const auto phase = active_set(Hp, gp, prow.C, prow.d, start, static_cast<int>(50 * (np + prow.C.rows()) + 100));
    phase_iterations = phase.iterations;
    const Vec xp = phase.x.head(n);
    if (!phase.converged || (Aeff * xp - b).maxCoeff() > feas_tol) {
      QpResult r;
      r.x = xp;
      r.status = QpStatus::infeasible;
      r.iterations = phase_iterations;
      r.lambda_ineq = Vec::Zero(Aeff.rows());
      r.lambda_lower = Vec::Zero(n);
      r.lambda_upper = Vec::Zero(n);
      return r;
    }
    x0 = xp.cwiseMax(lo).cwiseMin(hi);
  }

  const auto sol = active_set(Hreg, g, rows.C, rows.d, x0, max_iter);

  QpResult r;
  r.x = sol.x;
  r.iterations = sol.iterations + phase_iterations;
  r.status = sol.converged ? QpStatus::optimal : QpStatus::max_iterations;
  r.lambda_ineq = Vec::Zero(Aeff.rows());
  r.lambda_lower = Vec::Zero(n);
  r.lambda_upper = Vec::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int s = rows.source[static_cast<std::size_t>(i)];
    if (s >= 0) {
      r.lambda_ineq[s] = sol.lambda[i];
    } else if (-s - 1 < n) {
      r.lambda_upper[-s - 1] = sol.lambda[i];
    } else {
      r.lambda_lower[-s - 1 - n] = sol.lambda[i];
    }
  }
  return r;
}

}  // namespace exo
