#include "fsens/simulation.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fsens/dual.hpp"
#include "fsens/effects.hpp"
#include "fsens/errors.hpp"
#include "fsens/optim.hpp"
#include "fsens/rng.hpp"

namespace fsens::sim {

namespace {

constexpr std::uint64_t kTagData = 0x64617461ULL;
constexpr std::uint64_t kTagCoverage = 0x636f76ULL;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Gauss-Legendre nodes and weights on [0, 1].
template <int N>
void legendre_unit(std::vector<double>& nodes, std::vector<double>& weights) {
  using rule = boost::math::quadrature::gauss<double, N>;
  nodes.clear();
  weights.clear();
  const auto& a = rule::abscissa();
  const auto& w = rule::weights();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 0.0) {
      nodes.push_back(0.5);
      weights.push_back(0.5 * w[k]);
      continue;
    }
    nodes.push_back(0.5 * (1.0 - a[k]));
    weights.push_back(0.5 * w[k]);
    nodes.push_back(0.5 * (1.0 + a[k]));
    weights.push_back(0.5 * w[k]);
  }
}

// (sum w g P(t|x), sum w P(t|x)) over the tensor grid.
std::pair<double, double> tensor_sums(const DgpConfig& cfg, int t, const std::function<double(const double*)>& g,
                                      const std::vector<double>& nodes, const std::vector<double>& weights) {
  const int d = cfg.d;
  const std::size_t m = nodes.size();
  std::size_t total = 1;
  for (int j = 0; j < d; ++j) total *= m;
  double num = 0.0, den = 0.0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double w = 1.0;
    for (int j = 0; j < d; ++j) {
      const std::size_t k = rem % m;
      rem /= m;
      x[static_cast<std::size_t>(j)] = nodes[k];
      w *= weights[k];
    }
    const double e = cfg.propensity(x.data());
    const double pt = t == 1 ? e : 1.0 - e;
    num += w * pt * g(x.data());
    den += w * pt;
  }
  return {num, den};
}

// E[loss(alpha, eta, Z)], Z ~ N(0, 1), split at the conjugate's kinks.
double gaussian_risk(const Divergence& spec, double rho, double alpha, double eta, double tolerance) {
  // Gaussian mass beyond |z| = 15 is below 1e-50 and the losses grow polynomially there.
  constexpr double kTail = 15.0;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> edges{-kTail, kTail};
  for (double s : spec.conj_kinks()) {
    const double c = -eta - alpha * s;
    if (c > -kTail && c < kTail) edges.push_back(c);
  }
  std::sort(edges.begin(), edges.end());
  const double inv_sqrt_2pi = 0.3989422804014327;
  auto integrand = [&](double z) {
    const double l = dual::dual_loss(spec, rho, alpha, eta, z);
    const double p = inv_sqrt_2pi * std::exp(-0.5 * z * z);
    return p == 0.0 ? 0.0 : l * p;
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const auto r = stats::integrate(integrand, edges[k], edges[k + 1], tolerance);
    if (!std::isfinite(r.value)) return inf;
    total += r.value;
  }
  return total;
}

}  // namespace

DgpConfig DgpConfig::paper() {
  DgpConfig c;
  c.gamma = Eigen::Vector4d(-0.531, 0.126, -0.312, 0.018);
  c.beta1 = Eigen::Vector4d(0.531, 1.126, -0.312, 0.671);
  c.beta0 = Eigen::Vector4d(-0.531, -0.126, -0.312, 0.671);
  return c;
}

void DgpConfig::validate() const {
  if (n < 1) throw ConfigError("simulation: n must be positive");
  if (d < 1) throw ConfigError("simulation: d must be positive");
  if (gamma.size() != d || beta1.size() != d || beta0.size() != d)
    throw ConfigError("simulation: gamma, beta1 and beta0 must have length d");
  if (!std::isfinite(delta) || delta < 0.0) throw ConfigError("simulation: delta must be finite and nonnegative");
  if (!(sigma_coef >= 0.0) || !std::isfinite(sigma_coef)) throw ConfigError("simulation: sigma coefficient must be nonnegative");
}

double DgpConfig::propensity(const double* x) const {
  double z = 0.0;
  for (int j = 0; j < d; ++j) z += gamma(j) * x[j];
  return sigmoid(z);
}

double DgpConfig::sigma(const double* x) const { return std::sqrt(1.0 + sigma_coef * x[0] * x[0]); }

double DgpConfig::mean(const double* x, int t) const {
  const auto& b = t == 1 ? beta1 : beta0;
  double m = 0.0;
  for (int j = 0; j < d; ++j) m += b(j) * x[j];
  return m;
}

est::Dataset generate(const DgpConfig& cfg) {
  cfg.validate();
  est::Dataset data;
  data.X.resize(cfg.n, cfg.d);
  data.T.resize(cfg.n);
  data.Y.resize(cfg.n);
  rng::Philox gen(rng::derive_seed(cfg.seed, {kTagData}));
  std::vector<double> x(static_cast<std::size_t>(cfg.d));
  for (long i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.d; ++j) x[static_cast<std::size_t>(j)] = gen.uniform();
    const int t = gen.uniform() < cfg.propensity(x.data()) ? 1 : 0;
    const double s = cfg.sigma(x.data());
    const double eps = gen.normal();
    for (int j = 0; j < cfg.d; ++j) data.X(i, j) = x[static_cast<std::size_t>(j)];
    data.T(i) = t;
    data.Y(i) = cfg.mean(x.data(), t) - cfg.delta * (1 - t) * s + eps * s;
  }
  return data;
}

double true_odds_ratio(const double* x, double u, const DgpConfig& cfg) {
  const double m = cfg.mean(x, 1);
  const double s = cfg.sigma(x);
  return std::exp(-cfg.delta * (u - m) / s - 0.5 * cfg.delta * cfg.delta);
}

stats::QuadratureResult conditional_expectation(const DgpConfig& cfg, int t, const std::function<double(const double*)>& g,
                                                long mc_samples) {
  cfg.validate();
  if (cfg.d <= 5) {
    std::vector<double> n20, w20, n10, w10;
    legendre_unit<20>(n20, w20);
    legendre_unit<10>(n10, w10);
    const auto fine = cfg.d <= 4 ? tensor_sums(cfg, t, g, n20, w20) : tensor_sums(cfg, t, g, n10, w10);
    std::vector<double> n7, w7;
    legendre_unit<7>(n7, w7);
    const auto coarse = tensor_sums(cfg, t, g, n7, w7);
    const double value = fine.first / fine.second;
    return {value, std::fabs(value - coarse.first / coarse.second)};
  }
  rng::Philox gen(rng::derive_seed(cfg.seed, {0x6d63ULL}));
  std::vector<double> x(static_cast<std::size_t>(cfg.d));
  double num = 0.0, num2 = 0.0, den = 0.0;
  for (long i = 0; i < mc_samples; ++i) {
    for (auto& v : x) v = gen.uniform();
    const double e = cfg.propensity(x.data());
    const double pt = t == 1 ? e : 1.0 - e;
    const double gv = g(x.data());
    num += pt * gv;
    num2 += pt * gv * gv;
    den += pt;
  }
  const double value = num / den;
  const double var = std::max(0.0, num2 / den - value * value);
  return {value, std::sqrt(var / static_cast<double>(mc_samples))};
}

double unit_normal_lower_bound(const Divergence& spec, double rho, double tolerance) {
  if (!(rho > 0.0)) throw ConfigError("rho must be positive");
  if (spec.kind() == DivergenceKind::KL) return -std::sqrt(2.0 * rho);
  optim::OptimizerConfig opt;
  opt.restarts = 3;
  opt.f_tolerance = 1e-15;
  opt.x_tolerance = 1e-12;
  const double a0 = 1.0 / std::sqrt(2.0 * rho);
  optim::Objective obj = [&](const Eigen::VectorXd& z) { return gaussian_risk(spec, rho, std::exp(z(0)), z(1), tolerance); };
  Eigen::Vector2d x0(std::log(a0), -a0), step(0.5, 0.5);
  const auto res = optim::nelder_mead(obj, x0, step, opt);
  return -res.value;
}

GroundTruth ground_truth_bounds(const DgpConfig& cfg, const Divergence& spec, double rho, const TruthOptions& opt) {
  cfg.validate();
  GroundTruth g;
  g.rho = rho;
  g.unit_lower = unit_normal_lower_bound(spec, rho, opt.tolerance);
  g.unit_upper = -g.unit_lower;  // N(0, 1) is symmetric
  const auto m = conditional_expectation(cfg, 0, [&](const double* x) { return cfg.mean(x, 1); }, opt.x_samples);
  const auto s = conditional_expectation(cfg, 0, [&](const double* x) { return cfg.sigma(x); }, opt.x_samples);
  g.mu10_lower = m.value + g.unit_lower * s.value;
  g.mu10_upper = m.value + g.unit_upper * s.value;
  g.true_mean = m.value - cfg.delta * s.value;
  g.mc_error = m.error + std::fabs(g.unit_lower) * s.error;
  g.method = cfg.d <= 5 ? "scale-invariant N(0,1) bound x tensor Gauss-Legendre over X | T = 0"
                        : "scale-invariant N(0,1) bound x Monte Carlo over X | T = 0";
  return g;
}

TrueEffects true_effects(const DgpConfig& cfg) {
  auto diff = [&](const double* x) { return cfg.mean(x, 1) - cfg.mean(x, 0); };
  TrueEffects t;
  t.atc = conditional_expectation(cfg, 0, diff).value;
  t.att = conditional_expectation(cfg, 1, diff).value;
  // P(T = 1) = E[e(X)] under X ~ U[0,1]^d: the same quadrature with a flat weight.
  DgpConfig flat = cfg;
  flat.gamma.setZero();
  t.p1 = conditional_expectation(flat, 1, [&](const double* x) { return cfg.propensity(x); }).value;
  t.ate = t.p1 * t.att + (1.0 - t.p1) * t.atc;
  return t;
}

std::vector<CoverageCell> coverage_experiment(const CoverageConfig& cfg) {
  if (cfg.reps < 2) throw ConfigError("coverage experiment needs at least 2 replicates");
  if (!(cfg.level > 0.5 && cfg.level < 1.0)) throw ConfigError("coverage level must lie in (0.5, 1)");
  std::vector<CoverageCell> cells;
  for (std::size_t c = 0; c < cfg.deltas.size(); ++c) {
    CoverageCell cell;
    cell.delta = cfg.deltas[c];
    cell.rho = cfg.rho_rule(cell.delta);
    DgpConfig dgp = cfg.base;
    dgp.delta = cell.delta;
    const auto truth = ground_truth_bounds(dgp, cfg.spec, cell.rho);
    cell.truth_lower = truth.mu10_lower;
    cell.truth_upper = truth.mu10_upper;
    cell.true_mean = truth.true_mean;

    struct Rep {
      bool ok = false;
      std::string error;
      bool lower = false, upper = false, mean = false, one_lower = false, one_upper = false;
      double lp = 0.0, up = 0.0;
    };
    std::vector<Rep> reps(static_cast<std::size_t>(cfg.reps));
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < cfg.reps; ++r) {
      Rep out;
      try {
        DgpConfig local = dgp;
        local.seed = rng::derive_seed(cfg.base.seed, {kTagCoverage, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r)});
        const auto data = generate(local);
        const auto plan = est::split_folds(data, rng::derive_seed(cfg.estimator.seed, {static_cast<std::uint64_t>(r)}));
        est::NuisanceCache cache;
        const auto lo = est::estimate_bound(data, cfg.spec, cell.rho, est::Target::Mu10Lower, cfg.estimator, plan, {}, &cache);
        const auto hi = est::estimate_bound(data, cfg.spec, cell.rho, est::Target::Mu10Upper, cfg.estimator, plan, {}, &cache);
        using effects::CIKind;
        const auto ci_lo = effects::confidence_interval(effects::summary(lo), cfg.level, CIKind::TwoSidedBound);
        const auto ci_hi = effects::confidence_interval(effects::summary(hi), cfg.level, CIKind::TwoSidedBound);
        const auto ci_mean = effects::mean_interval(effects::summary(lo), effects::summary(hi), cfg.level);
        const auto lcb = effects::confidence_interval(effects::summary(lo), cfg.level, CIKind::OneSidedLower);
        const auto ucb = effects::confidence_interval(effects::summary(hi), cfg.level, CIKind::OneSidedUpper);
        out.lower = ci_lo.contains(truth.mu10_lower);
        out.upper = ci_hi.contains(truth.mu10_upper);
        out.mean = ci_mean.contains(truth.true_mean);
        out.one_lower = lcb.contains(truth.mu10_lower);
        out.one_upper = ucb.contains(truth.mu10_upper);
        out.lp = lo.point;
        out.up = hi.point;
        out.ok = true;
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = "replicate " + std::to_string(r) + ": " + e.what();
      }
      reps[static_cast<std::size_t>(r)] = out;
    }
    int ok = 0;
    for (const auto& r : reps) {
      if (!r.ok) {
        ++cell.failures;
        cell.failure_messages.push_back(r.error);
        continue;
      }
      ++ok;
      cell.coverage_lower += r.lower;
      cell.coverage_upper += r.upper;
      cell.coverage_mean += r.mean;
      cell.coverage_one_sided_lower += r.one_lower;
      cell.coverage_one_sided_upper += r.one_upper;
      cell.lower_points.push_back(r.lp);
      cell.upper_points.push_back(r.up);
    }
    cell.reps = ok;
    if (ok > 0) {
      for (double* v : {&cell.coverage_lower, &cell.coverage_upper, &cell.coverage_mean, &cell.coverage_one_sided_lower,
                        &cell.coverage_one_sided_upper})
        *v /= ok;
      cell.se = std::sqrt(cfg.level * (1.0 - cfg.level) / ok);
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

stats::QuadratureResult example1_bound(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("example1_bound: delta must be positive");
  const double inv_sqrt_2pi = 0.3989422804014327;
  auto integrand = [delta, inv_sqrt_2pi](double u) {
    // 1 / (1 + e^{delta u}) written to avoid overflow
    const double z = delta * u;
    const double logistic = z > 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    return u * inv_sqrt_2pi * std::exp(-0.5 * u * u) * logistic;
  };
  const auto r = stats::integrate(integrand, -std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity(), 1e-13);
  return {-2.0 * delta * r.value, 2.0 * delta * r.error};
}

std::vector<double> odds_ratio_quantiles(const DgpConfig& cfg, const std::vector<double>& probs, long draws) {
  cfg.validate();
  rng::Philox gen(rng::derive_seed(cfg.seed, {0x6f72ULL}));
  std::vector<double> ors;
  ors.reserve(static_cast<std::size_t>(draws));
  std::vector<double> x(static_cast<std::size_t>(cfg.d));
  while (static_cast<long>(ors.size()) < draws) {
    for (auto& v : x) v = gen.uniform();
    const double u = cfg.mean(x.data(), 1) + cfg.sigma(x.data()) * gen.normal();
    if (gen.uniform() >= cfg.propensity(x.data())) continue;  // keep treated units only
    ors.push_back(true_odds_ratio(x.data(), u, cfg));
  }
  std::vector<double> out;
  for (double p : probs) out.push_back(stats::quantile(ors, p));
  return out;
}

}  // namespace fsens::sim
