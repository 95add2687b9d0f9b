#include "fsens/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fsens/errors.hpp"

namespace fsens::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded(const Objective& f, const Eigen::VectorXd& x, const OptimizerConfig& cfg) {
  const double v = f(x);
  if (std::isnan(v)) return kInf;
  if (v < cfg.divergence_floor)
    throw NumericalError("objective diverged below " + std::to_string(cfg.divergence_floor) +
                         "; the divergence may violate the positivity conditions on alpha");
  return v;
}

Result nelder_mead_once(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                        const OptimizerConfig& cfg, int budget) {
  const auto n = x0.size();
  const double dn = static_cast<double>(n);
  const double reflect = 1.0, expand = 1.0 + 2.0 / dn, contract = 0.75 - 1.0 / (2.0 * dn),
               shrink = 1.0 - 1.0 / dn;
  std::vector<Eigen::VectorXd> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) simplex[i + 1](i) += step(i);
  for (Eigen::Index i = 0; i <= n; ++i) values[i] = guarded(f, simplex[i], cfg);

  std::vector<Eigen::Index> order(n + 1);
  Result res;
  int it = 0;
  for (; it < budget; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const auto best = order.front(), worst = order.back(), second = order[n - 1];

    double spread = 0.0;
    for (Eigen::Index i = 0; i <= n; ++i)
      spread = std::max(spread, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
    const double fspread = values[worst] - values[best];
    if (spread <= cfg.x_tolerance ||
        (std::isfinite(fspread) && fspread <= cfg.f_tolerance * (1.0 + std::fabs(values[best])))) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= dn;

    const Eigen::VectorXd xr = centroid + reflect * (centroid - simplex[worst]);
    const double fr = guarded(f, xr, cfg);
    if (fr < values[best]) {
      const Eigen::VectorXd xe = centroid + expand * (xr - centroid);
      const double fe = guarded(f, xe, cfg);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + contract * (xr - centroid))
                                       : Eigen::VectorXd(centroid + contract * (simplex[worst] - centroid));
    const double fc = guarded(f, xc, cfg);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + shrink * (simplex[i] - simplex[best]);
      values[i] = guarded(f, simplex[i], cfg);
    }
  }
  const auto best = std::min_element(values.begin(), values.end()) - values.begin();
  res.x = simplex[best];
  res.value = values[best];
  res.iterations = it;
  return res;
}

}  // namespace

Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                   const OptimizerConfig& cfg) {
  Result best = nelder_mead_once(f, x0, step, cfg, cfg.max_iterations);
  int used = best.iterations;
  // Restart from the incumbent with a fresh simplex; stop once a restart no
  // longer improves the value.
  for (int round = 0; round < 4 && used < 4 * cfg.max_iterations; ++round) {
    Eigen::VectorXd s = step.cwiseMin(best.x.cwiseAbs().cwiseMax(1e-3) * 0.1).cwiseMax(1e-6);
    Result next = nelder_mead_once(f, best.x, s, cfg, cfg.max_iterations);
    used += next.iterations;
    const bool improved = next.value < best.value - cfg.f_tolerance * (1.0 + std::fabs(best.value));
    if (next.value <= best.value) best = next;
    if (!improved) break;
  }
  best.iterations = used;
  return best;
}

Result damped_newton(const SecondOrderObjective& f, const Eigen::VectorXd& x0, const Box& box,
                     const OptimizerConfig& cfg) {
  const auto n = x0.size();
  Result res;
  res.x = box.project(x0);
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd hess(n, n);
  double value = kInf;
  if (!f(res.x, value, &grad, &hess) || !std::isfinite(value)) {
    res.value = kInf;
    return res;
  }
  double lambda = 1e-10;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (value < cfg.divergence_floor)
      throw NumericalError("objective diverged below " + std::to_string(cfg.divergence_floor));
    // Freeze coordinates sitting on a bound with the gradient pushing outward.
    std::vector<char> free(n, 1);
    double gnorm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = res.x(i) <= box.lower(i) && grad(i) > 0.0;
      const bool at_hi = res.x(i) >= box.upper(i) && grad(i) < 0.0;
      if (at_lo || at_hi) free[i] = 0;
      else gnorm = std::max(gnorm, std::fabs(grad(i)));
    }
    if (gnorm <= cfg.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::MatrixXd h = hess;
    Eigen::VectorXd g = grad;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (free[i]) continue;
      h.row(i).setZero();
      h.col(i).setZero();
      h(i, i) = 1.0;
      g(i) = 0.0;
    }
    const double diag_scale = std::max(1e-12, h.diagonal().cwiseAbs().maxCoeff());
    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      Eigen::MatrixXd damped = h;
      damped.diagonal().array() += lambda * diag_scale;
      Eigen::VectorXd dir = damped.ldlt().solve(-g);
      if (!dir.allFinite() || g.dot(dir) >= 0.0) dir = -g / diag_scale;
      double t = 1.0;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        Eigen::VectorXd trial = box.project(res.x + t * dir);
        double tv = kInf;
        if (!f(trial, tv, nullptr, nullptr) || !std::isfinite(tv)) continue;
        const double predicted = g.dot(trial - res.x);
        if (tv <= value + 1e-4 * std::min(predicted, 0.0)) {
          const double change = value - tv;
          const double step = (trial - res.x).cwiseAbs().maxCoeff();
          res.x = trial;
          f(res.x, value, &grad, &hess);
          accepted = true;
          if (ls == 0) lambda = std::max(lambda * 0.1, 1e-14);
          if (change <= cfg.f_tolerance * (1.0 + std::fabs(value)) && step <= cfg.x_tolerance * (1.0 + res.x.norm())) {
            res.converged = true;
          }
          break;
        }
      }
      if (!accepted) lambda = std::min(lambda * 100.0, 1e12);
    }
    if (!accepted || res.converged) {
      res.converged = res.converged || !accepted;
      break;
    }
  }
  res.value = value;
  res.iterations = it;
  return res;
}

}  // namespace fsens::optim
