#pragma once

#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace qutrit {

struct NelderMeadOptions {
  /// Converged when max f - min f over the simplex is below this.
  double ftol = 1e-10;
  /// ...and every vertex lies within this distance (max-norm) of the best one.
  double xtol = std::numeric_limits<double>::infinity();
  int max_iterations = 2000;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd &)>;

/// Downhill simplex minimization (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). The initial simplex is x0 plus one axis step per coordinate.
/// Function values only; no gradients. Deterministic.
NelderMeadResult nelder_mead(const Objective &f, const Eigen::VectorXd &x0,
                             const Eigen::VectorXd &steps,
                             const NelderMeadOptions &opts);

/// Repeats nelder_mead from the previous optimum with a fresh simplex until a
/// restart improves the minimum by less than opts.ftol, or `max_restarts` is
/// reached. Counts are summed over all runs; `converged` refers to the last.
NelderMeadResult nelder_mead_restarted(const Objective &f,
                                       const Eigen::VectorXd &x0,
                                       const Eigen::VectorXd &steps,
                                       const NelderMeadOptions &opts,
                                       int max_restarts = 5);

} // namespace qutrit
