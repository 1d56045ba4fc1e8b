// Copyright 2026 The linsup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LINSUP_NEWTON_HPP_
#define LINSUP_NEWTON_HPP_

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "linsup/error.hpp"

namespace linsup {

struct NewtonOptions {
  double grad_tol = 1e-10;      // sup-norm of the projected gradient
  int max_iterations = 500;
  double theta_cap = 1e3;       // |x| beyond this means the maximizer does not exist
  int max_failed_line_searches = 3;
  double armijo = 1e-4;
};

struct NewtonResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool gradient_fallback = false;
};

// Maximizes a smooth concave function over the affine span `basis`
// (orthonormal d x r columns), starting from the projection of x0.
//
// `eval(x, value, grad, hess)` fills the value, gradient and Hessian at x;
// `hess` may be null when only value and gradient are needed. Newton steps
// use Armijo backtracking; after `max_failed_line_searches` failed Newton
// searches the solver switches to gradient ascent for the rest of the run.
// Throws NotInPolytope when |x| exceeds the cap, the signature of an
// objective that is unbounded above.
template <typename Eval>
NewtonResult MaximizeConcave(Eval&& eval, const Eigen::VectorXd& x0,
                             const Eigen::MatrixXd& basis,
                             const NewtonOptions& opts = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  NewtonResult result;
  VectorXd x = basis * (basis.transpose() * x0);
  double value = 0.0;
  VectorXd grad;
  MatrixXd hess;
  int failed_searches = 0;
  bool gradient_mode = false;
  double gradient_step = 1.0;

  for (int it = 0; it <= opts.max_iterations; ++it) {
    eval(x, &value, &grad, &hess);
    const VectorXd gz = basis.transpose() * grad;
    result.grad_norm = (basis * gz).cwiseAbs().maxCoeff();
    if (basis.cols() == 0) result.grad_norm = 0.0;
    result.iterations = it;
    if (result.grad_norm <= opts.grad_tol) {
      result.converged = true;
      break;
    }
    if (it == opts.max_iterations) break;

    VectorXd dz;
    bool newton_step = false;
    if (!gradient_mode) {
      const MatrixXd neg_hz = -(basis.transpose() * hess * basis);
      Eigen::LDLT<MatrixXd> ldlt(0.5 * (neg_hz + neg_hz.transpose()));
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        dz = ldlt.solve(gz);
        newton_step = dz.allFinite() && gz.dot(dz) > 0.0;
      }
      if (!newton_step) ++failed_searches;
    }
    if (!newton_step) dz = gz * gradient_step;

    const double slope = gz.dot(dz);
    double t = 1.0;
    bool accepted = false;
    VectorXd trial;
    // Predicted gain under rounding noise: Armijo cannot judge it, take the
    // full Newton step.
    const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(value));
    if (newton_step && 0.5 * slope <= noise) {
      trial = x + basis * dz;
      accepted = true;
    }
    for (int k = 0; k < 60 && !accepted; ++k) {
      trial = x + basis * (t * dz);
      double trial_value = 0.0;
      VectorXd trial_grad;
      eval(trial, &trial_value, &trial_grad, nullptr);
      if (std::isfinite(trial_value) &&
          trial_value >= value + opts.armijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (newton_step) {
        ++failed_searches;
      } else if (gradient_mode) {
        break;  // stalled: no ascent available at working precision
      }
      if (failed_searches >= opts.max_failed_line_searches) gradient_mode = true;
      continue;
    }
    if (!newton_step) {
      result.gradient_fallback = true;
      gradient_step = t == 1.0 ? gradient_step * 2.0 : gradient_step * t;
    }
    if (failed_searches >= opts.max_failed_line_searches) gradient_mode = true;
    x = trial;
    if (x.norm() > opts.theta_cap) {
      throw Error(ErrorCode::kNotInPolytope,
                  "parameter norm exceeded cap " + std::to_string(opts.theta_cap) +
                      "; moments lie outside the marginal polytope");
    }
  }
  result.x = x;
  return result;
}

}  // namespace linsup

#endif  // LINSUP_NEWTON_HPP_
