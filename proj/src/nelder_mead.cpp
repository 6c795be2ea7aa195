#include "qutrit/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qutrit {

NelderMeadResult nelder_mead(const Objective &f, const Eigen::VectorXd &x0,
                             const Eigen::VectorXd &steps,
                             const NelderMeadOptions &opts) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  NelderMeadResult res;

  auto eval = [&](const Eigen::VectorXd &x) {
    ++res.evaluations;
    return f(x);
  };

  for (Eigen::Index i = 0; i < n; ++i)
    pts[i + 1](i) += steps(i);
  for (Eigen::Index i = 0; i <= n; ++i)
    fv[i] = eval(pts[i]);

  std::vector<Eigen::Index> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    // Index tie-break keeps the ordering independent of sort implementation.
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return fv[a] < fv[b];
    });
    std::vector<Eigen::VectorXd> p2(n + 1);
    std::vector<double> f2(n + 1);
    for (Eigen::Index i = 0; i <= n; ++i) {
      p2[i] = std::move(pts[order[i]]);
      f2[i] = fv[order[i]];
    }
    pts = std::move(p2);
    fv = std::move(f2);
  };

  auto converged = [&] {
    if (fv[n] - fv[0] > opts.ftol)
      return false;
    if (std::isinf(opts.xtol))
      return true;
    for (Eigen::Index i = 1; i <= n; ++i)
      if ((pts[i] - pts[0]).cwiseAbs().maxCoeff() > opts.xtol)
        return false;
    return true;
  };

  sort_simplex();
  while (res.iterations < opts.max_iterations) {
    if (converged()) {
      res.converged = true;
      break;
    }
    ++res.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      centroid += pts[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[n]);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[n]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      const Eigen::VectorXd xc = outside
                                     ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                     : Eigen::VectorXd(centroid + 0.5 * (pts[n] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[n])) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        for (Eigen::Index i = 1; i <= n; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          fv[i] = eval(pts[i]);
        }
      }
    }
    sort_simplex();
  }
  if (!res.converged && converged())
    res.converged = true;

  res.x = pts[0];
  res.f = fv[0];
  return res;
}

NelderMeadResult nelder_mead_restarted(const Objective &f,
                                       const Eigen::VectorXd &x0,
                                       const Eigen::VectorXd &steps,
                                       const NelderMeadOptions &opts,
                                       int max_restarts) {
  NelderMeadResult best = nelder_mead(f, x0, steps, opts);
  for (int r = 0; r < max_restarts; ++r) {
    NelderMeadResult next = nelder_mead(f, best.x, steps, opts);
    const bool small_gain = best.f - next.f < opts.ftol;
    next.iterations += best.iterations;
    next.evaluations += best.evaluations;
    if (next.f <= best.f) {
      best = std::move(next);
    } else {
      best.iterations = next.iterations;
      best.evaluations = next.evaluations;
    }
    if (small_gain)
      break;
  }
  return best;
}

} // namespace qutrit
