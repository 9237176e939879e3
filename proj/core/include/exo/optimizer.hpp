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

#include <functional>
#include <limits>
#include <string_view>
#include <vector>

namespace exo {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Quadratic programming
// ---------------------------------------------------------------------------

enum class QpStatus { optimal, infeasible, max_iterations };

struct QpSettings {
  double eigenvalue_floor = 1e-8;  // Hessian is shifted so its smallest eigenvalue is at least this
  double feasibility_tolerance = 1e-9;
  int max_iterations = 0;  // 0 picks a bound from the problem size
};

/// Solution of min 1/2 x'Hx + g'x  s.t.  A x <= b,  lo <= x <= hi.
/// Multipliers are non-negative at optimality and satisfy
///   H x + g + A' lambda_ineq + lambda_upper - lambda_lower = 0.
struct QpResult {
  Vec x;
  Vec lambda_ineq;
  Vec lambda_lower;
  Vec lambda_upper;
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
};

/// Dense primal active-set QP solver. Starts from clamp(0, lo, hi); when that
/// point violates A x <= b a slack-penalty phase finds a feasible start first.
/// A may have zero rows; lo/hi may hold +-infinity.
QpResult solve_qp(const Mat& H, const Vec& g, const Mat& A, const Vec& b, const Vec& lo, const Vec& hi,
                  const QpSettings& settings = {});

// ---------------------------------------------------------------------------
// Sequential quadratic programming
// ---------------------------------------------------------------------------

/// Smooth objective with linear inequalities and simple bounds. An empty
/// gradient callback selects central finite differences.
struct NlpProblem {
  int n = 0;
  std::function<double(const Vec&)> objective;
  std::function<Vec(const Vec&)> gradient;
  // Optional starting matrix for the quasi-Newton Hessian (e.g. Gauss-Newton
  // for least-squares objectives). Falls back to the identity if it is not
  // positive definite.
  std::function<Mat(const Vec&)> initial_hessian;
  Mat A;  // m x n, may have zero rows
  Vec b;
  Vec lo;  // empty means unbounded
  Vec hi;

  void validate() const;
};

struct SqpSettings {
  int max_iterations = 30;
  double kkt_tolerance = 1e-6;
  double step_tolerance = 1e-9;
  double fd_step = 1e-6;  // central-difference step when no gradient is given
  int max_backtracks = 40;
  double armijo = 1e-4;
  QpSettings qp;
};

enum class SqpStatus { converged, max_iterations, qp_infeasible, line_search_failed };

std::string_view to_string(SqpStatus s);

struct SqpResult {
  Vec x;
  double objective = kInf;
  double kkt_residual = kInf;
  int iterations = 0;  // accepted steps
  SqpStatus status = SqpStatus::max_iterations;
  int hessian_resets = 0;
  std::vector<double> merit_history;  // merit value at every accepted iterate, starting with x0
};

/// Damped-BFGS SQP with an l1 merit backtracking line search. Holds the
/// quasi-Newton workspace, so one instance per thread.
class SqpSolver {
 public:
  explicit SqpSolver(SqpSettings settings = {}) : settings_(settings) {}

  SqpResult solve(const NlpProblem& problem, const Vec& x0);

  [[nodiscard]] const SqpSettings& settings() const { return settings_; }
  SqpSettings& settings() { return settings_; }
  /// Hessian approximation left by the most recent solve.
  [[nodiscard]] const Mat& hessian() const { return B_; }

 private:
  SqpSettings settings_;
  Mat B_;
};

SqpResult sqp_solve(const NlpProblem& problem, const Vec& x0, const SqpSettings& settings = {});

/// Central finite-difference gradient with step h * max(1, |x_i|).
Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h);

/// Largest relative mismatch between the analytic gradient and central
/// differences at x. Requires problem.gradient.
double gradient_check(const NlpProblem& problem, const Vec& x, double h = 1e-6);

}  // namespace exo
