#include "fsens/dual.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fsens/errors.hpp"
#include "fsens/rng.hpp"
#include "fsens/stats.hpp"

namespace fsens::dual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_alpha(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("dual loss requires alpha > 0");
}

}  // namespace

double dual_loss(const Divergence& spec, double rho, double alpha, double eta, double y) {
  require_alpha(alpha);
  const double s = (y + eta) / (-alpha);
  const double c = spec.conj(s);
  if (std::isinf(c)) return kInf;
  return alpha * c + eta + alpha * rho;
}

LossGradient dual_loss_gradient(const Divergence& spec, double rho, double alpha, double eta, double y) {
  require_alpha(alpha);
  const double s = (y + eta) / (-alpha);
  const double cp = spec.conj_prime(s);
  return {spec.conj(s) - s * cp + rho, 1.0 - cp};
}

LossHessian dual_loss_hessian(const Divergence& spec, double /*rho*/, double alpha, double eta, double y) {
  require_alpha(alpha);
  const double s = (y + eta) / (-alpha);
  const double w = spec.conj_second(s) / alpha;
  return {w * s * s, w * s, w};
}

PointwiseEval pointwise_objective(const Divergence& spec, double rho, double alpha, double eta,
                                  std::span<const double> y, std::span<const double> weights) {
  PointwiseEval out;
  const double uniform = 1.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = weights.empty() ? uniform : weights[i];
    const double s = (y[i] + eta) / (-alpha);
    const double c = spec.conj(s);
    if (std::isinf(c)) {
      out.value = kInf;
      return out;
    }
    const double cp = spec.conj_prime(s);
    const double h = spec.conj_second(s) / alpha;
    out.value += w * (alpha * c + eta + alpha * rho);
    out.grad.d_alpha += w * (c - s * cp + rho);
    out.grad.d_eta += w * (1.0 - cp);
    out.hess.aa += w * h * s * s;
    out.hess.ab += w * h * s;
    out.hess.bb += w * h;
  }
  return out;
}

DualPoint solve_pointwise_dual(const Divergence& spec, double rho, std::span<const double> y_samples, double eps,
                               const optim::OptimizerConfig& opt, std::span<const double> weights) {
  if (y_samples.empty()) throw std::invalid_argument("solve_pointwise_dual: empty sample");
  if (!(eps > 0.0)) throw std::invalid_argument("solve_pointwise_dual: eps must be positive");
  if (!(rho > 0.0)) throw std::invalid_argument("solve_pointwise_dual: rho must be positive");
  std::vector<double> w;
  if (!weights.empty()) {
    if (weights.size() != y_samples.size()) throw std::invalid_argument("weights/sample size mismatch");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    w.reserve(weights.size());
    for (double v : weights) w.push_back(v / total);
  }

  auto objective = [&](double alpha, double eta) {
    double total = 0.0;
    const double uniform = 1.0 / static_cast<double>(y_samples.size());
    for (std::size_t i = 0; i < y_samples.size(); ++i) {
      const double c = spec.conj((y_samples[i] + eta) / (-alpha));
      if (std::isinf(c)) return kInf;
      total += (w.empty() ? uniform : w[i]) * (alpha * c + eta + alpha * rho);
    }
    return total;
  };

  const double med = stats::median(std::vector<double>(y_samples.begin(), y_samples.end()));
  const double spread = stats::iqr(y_samples);
  const double y_min = *std::min_element(y_samples.begin(), y_samples.end());
  const double alpha0 = std::max(eps, spread);
  double eta0 = -med;
  if (!std::isfinite(objective(alpha0, eta0))) eta0 = -y_min + alpha0;
  const double u0 = std::log(std::max(alpha0 - eps, 1e-3 * alpha0));
  const double eta_step = std::max(spread, 1e-2 * (1.0 + std::fabs(med)));

  optim::Objective nm = [&](const Eigen::VectorXd& z) { return objective(eps + std::exp(z(0)), z(1)); };
  Eigen::VectorXd step(2);
  step << 1.0, eta_step;

  rng::Philox gen(rng::derive_seed(opt.seed, {0x706f696e74ULL}));
  optim::Result best;
  best.value = kInf;
  int iterations = 0;
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    Eigen::VectorXd z0(2);
    z0 << u0, eta0;
    if (r > 0) {
      z0(0) += gen.normal();
      z0(1) += eta_step * gen.normal();
      if (!std::isfinite(nm(z0))) z0(1) = -y_min + eps + std::exp(z0(0));
    }
    auto res = optim::nelder_mead(nm, z0, step, opt);
    iterations += res.iterations;
    if (res.value < best.value) best = res;
  }

  DualPoint out;
  out.alpha = eps + std::exp(best.x(0));
  out.eta = best.x(1);
  out.value = best.value;

  if (opt.polish) {
    optim::SecondOrderObjective second = [&](const Eigen::VectorXd& x, double& value, Eigen::VectorXd* g,
                                             Eigen::MatrixXd* h) {
      if (!(x(0) > 0.0)) return false;
      const auto ev = pointwise_objective(spec, rho, x(0), x(1), y_samples, w);
      value = ev.value;
      if (!std::isfinite(value)) return false;
      if (g) *g << ev.grad.d_alpha, ev.grad.d_eta;
      if (h) *h << ev.hess.aa, ev.hess.ab, ev.hess.ab, ev.hess.bb;
      return true;
    };
    optim::Box box{Eigen::Vector2d(eps, -kInf), Eigen::Vector2d(kInf, kInf)};
    Eigen::Vector2d x0(out.alpha, out.eta);
    auto polished = optim::damped_newton(second, x0, box, opt);
    iterations += polished.iterations;
    if (polished.value <= out.value) {
      out.alpha = polished.x(0);
      out.eta = polished.x(1);
      out.value = polished.value;
    }
  }

  const auto ev = pointwise_objective(spec, rho, out.alpha, out.eta, y_samples, w);
  out.at_floor = out.alpha <= eps * (1.0 + 1e-6) + 1e-300;
  const double ga = (out.at_floor && ev.grad.d_alpha > 0.0) ? 0.0 : ev.grad.d_alpha;
  out.gradient_norm = std::hypot(ga, ev.grad.d_eta);
  out.iterations = iterations;
  if (out.at_floor) out.warnings.push_back("alpha pinned at the truncation floor eps");
  return out;
}

void DiscreteInstance::validate() const {
  if (support.empty() || support.size() != probs.size())
    throw std::invalid_argument("discrete instance: support/probs size mismatch");
  double total = 0.0;
  for (double p : probs) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("discrete instance: probabilities must lie in (0, 1]");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw std::invalid_argument("discrete instance: probabilities must sum to 1");
  std::vector<double> sorted = support;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("discrete instance: support values must be distinct");
  if (!(rho >= 0.0)) throw std::invalid_argument("discrete instance: rho must be nonnegative");
  if (!(r > 0.0)) throw std::invalid_argument("discrete instance: r must be positive");
}

PrimalSolution primal_oracle_discrete(const Divergence& spec, const DiscreteInstance& inst) {
  inst.validate();
  const auto n = static_cast<Eigen::Index>(inst.support.size());
  PrimalSolution sol;
  const double y_mean = std::accumulate(inst.support.begin(), inst.support.end(), 0.0) / static_cast<double>(n);
  double y_scale = 0.0;
  for (double y : inst.support) y_scale = std::max(y_scale, std::fabs(y - y_mean));
  if (n == 1 || inst.rho == 0.0 || y_scale == 0.0) {
    // L = r is the only feasible point (zero budget or a single atom) or every
    // feasible point has the same value.
    sol.L.assign(n, inst.r);
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) m += inst.probs[i] * inst.support[i];
    sol.min_mean = inst.r * m;
    return sol;
  }

  Eigen::VectorXd p(n), c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = inst.probs[i];
    c(i) = p(i) * (inst.support[i] - y_mean) / y_scale;
  }
  auto divergence = [&](const Eigen::VectorXd& w) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += p(i) * spec.f(w(i));
    return s;
  };
  auto barrier = [&](const Eigen::VectorXd& w, double t) {
    if ((w.array() <= 0.0).any()) return kInf;
    const double slack = inst.rho - divergence(w);
    if (!(slack > 0.0)) return kInf;
    return t * c.dot(w) - std::log(slack) - (p.array() * w.array().log()).sum();
  };

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  // Probability-weighted log barrier on w > 0: the duality gap is at most 2 / t.
  const double m = 2.0;
  double t = 1.0;
  int iterations = 0;
  while (m / t > 1e-11) {
    for (int it = 0; it < 200; ++it, ++iterations) {
      const double slack = inst.rho - divergence(w);
      Eigen::VectorXd fgrad(n), fhess(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        fgrad(i) = p(i) * spec.f_prime(w(i));
        fhess(i) = p(i) * spec.f_second(w(i));
      }
      const Eigen::VectorXd g = t * c + fgrad / slack - (p.array() / w.array()).matrix();
      // Hessian is diag(d) + u u^T / slack^2; invert it by Sherman-Morrison.
      const Eigen::ArrayXd d = fhess.array() / slack + p.array() / w.array().square();
      auto solve = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        const Eigen::VectorXd dv = (v.array() / d).matrix();
        const Eigen::VectorXd du = (fgrad.array() / d).matrix();
        return dv - du * (fgrad.dot(dv) / (slack * slack + fgrad.dot(du)));
      };
      // Equality-constrained Newton step on sum_i p_i w_i = 1 via the Schur complement.
      const Eigen::VectorXd hg = solve(g);
      const Eigen::VectorXd hp = solve(p);
      const double nu = (1.0 - p.dot(w) + p.dot(hg)) / p.dot(hp);
      const Eigen::VectorXd step = -hg + nu * hp;
      const double decrement = -g.dot(step);
      if (decrement / 2.0 <= 1e-14) break;
      const double f0 = barrier(w, t);
      double s = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
        Eigen::VectorXd trial = w + s * step;
        const double ft = barrier(trial, t);
        if (std::isfinite(ft) && ft <= f0 - 0.25 * s * decrement) {
          w = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    t *= 8.0;
  }
  sol.iterations = iterations;
  sol.L.resize(n);
  double value = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sol.L[i] = inst.r * w(i);
    value += p(i) * w(i) * inst.support[i];
  }
  sol.min_mean = inst.r * value;
  return sol;
}

}  // namespace fsens::dual
