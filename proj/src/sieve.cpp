#include "fsens/sieve.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "fsens/dual.hpp"
#include "fsens/errors.hpp"
#include "fsens/kernels.hpp"
#include "fsens/rng.hpp"
#include "fsens/stats.hpp"

namespace fsens::sieve {

namespace {

void enumerate_terms(int d, int m, int max_active, std::vector<std::vector<int>>& out) {
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::function<void(int, int)> rec = [&](int j, int active) {
    if (j == d) {
      out.push_back(idx);
      return;
    }
    idx[static_cast<std::size_t>(j)] = 0;
    rec(j + 1, active);
    if (active == max_active) return;
    for (int k = 1; k < m; ++k) {
      idx[static_cast<std::size_t>(j)] = k;
      rec(j + 1, active + 1);
    }
    idx[static_cast<std::size_t>(j)] = 0;
  };
  rec(0, 0);
  auto key = [](const std::vector<int>& t) {
    int active = 0, total = 0;
    for (int v : t) {
      active += v > 0;
      total += v;
    }
    return std::pair{active, total};
  };
  std::stable_sort(out.begin(), out.end(), [&](const auto& l, const auto& r) { return key(l) < key(r); });
}

}  // namespace

SieveBasis build_basis(BasisKind kind, int order, int J, int d, const std::vector<Interval>& domain,
                       int interaction_order, double max_mesh_ratio) {
  if (d < 1) throw ConfigError("sieve: dimension must be at least 1");
  if (J < 0) throw ConfigError("sieve: J must be nonnegative");
  if (order < 1) throw ConfigError("sieve: order must be at least 1");
  if (interaction_order < 0) throw ConfigError("sieve: interaction order must be nonnegative");
  SieveBasis b;
  b.kind_ = kind;
  b.order_ = order;
  b.J_ = J;
  b.dim_ = d;
  b.interaction_order_ = interaction_order == 0 ? d : std::min(interaction_order, d);
  b.domain_ = domain.empty() ? std::vector<Interval>(static_cast<std::size_t>(d)) : domain;
  if (static_cast<int>(b.domain_.size()) != d) throw ConfigError("sieve: domain must have one interval per dimension");
  for (const auto& iv : b.domain_)
    if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi))
      throw ConfigError("sieve: domain intervals must be finite, nonempty and increasing");
  b.per_dim_ = kind == BasisKind::Polynomial ? J + 1 : order + J;
  if (kind == BasisKind::Spline) {
    for (const auto& iv : b.domain_) {
      std::vector<double> k;
      for (int j = 1; j <= J; ++j) k.push_back(iv.lo + (iv.hi - iv.lo) * j / (J + 1.0));
      b.knots_.push_back(std::move(k));
    }
    if (b.mesh_ratio() > max_mesh_ratio) throw ConfigError("sieve: knot mesh ratio exceeds the configured bound");
  }
  enumerate_terms(d, b.per_dim_, b.interaction_order_, b.terms_);
  return b;
}

double SieveBasis::mesh_ratio() const {
  double worst = 1.0;
  for (std::size_t j = 0; j < knots_.size(); ++j) {
    std::vector<double> pts{domain_[j].lo};
    pts.insert(pts.end(), knots_[j].begin(), knots_[j].end());
    pts.push_back(domain_[j].hi);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double gap = pts[i] - pts[i - 1];
      if (!(gap > 0.0)) return std::numeric_limits<double>::infinity();
      lo = std::min(lo, gap);
      hi = std::max(hi, gap);
    }
    worst = std::max(worst, hi / lo);
  }
  return worst;
}

void SieveBasis::univariate(int j, double t, double* out) const {
  if (kind_ == BasisKind::Polynomial) {
    double v = 1.0;
    for (int k = 0; k <= J_; ++k, v *= t) out[k] = v;
    return;
  }
  double v = 1.0;
  for (int k = 0; k < order_; ++k, v *= t) out[k] = v;
  const auto& iv = domain_[static_cast<std::size_t>(j)];
  for (int k = 0; k < J_; ++k) {
    const double kappa = (knots_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] - iv.lo) / (iv.hi - iv.lo);
    const double diff = t - kappa;
    out[order_ + k] = order_ == 1 ? (diff > 0.0 ? 1.0 : 0.0) : (diff > 0.0 ? std::pow(diff, order_ - 1) : 0.0);
  }
}

bool SieveBasis::evaluate(const double* x, double* out) const {
  bool clamped = false;
  std::vector<double> table(static_cast<std::size_t>(dim_ * per_dim_));
  for (int j = 0; j < dim_; ++j) {
    const auto& iv = domain_[static_cast<std::size_t>(j)];
    double v = x[j];
    if (v < iv.lo || v > iv.hi) {
      clamped = true;
      v = std::clamp(v, iv.lo, iv.hi);
    }
    univariate(j, (v - iv.lo) / (iv.hi - iv.lo), table.data() + j * per_dim_);
  }
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    double prod = 1.0;
    for (int j = 0; j < dim_; ++j) {
      const int idx = terms_[k][static_cast<std::size_t>(j)];
      if (idx > 0) prod *= table[static_cast<std::size_t>(j * per_dim_ + idx)];
    }
    out[k] = prod;
  }
  return clamped;
}

Eigen::MatrixXd SieveBasis::design(const Eigen::MatrixXd& X) const {
  if (X.cols() != dim_) throw DataError("sieve: covariate dimension does not match the basis");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(X.rows(), n_terms());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr = X;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < X.rows(); ++i) evaluate(Xr.row(i).data(), out.row(i).data());
  return out;
}

std::string SieveBasis::describe() const {
  std::ostringstream os;
  os << (kind_ == BasisKind::Polynomial ? "polynomial" : "spline") << "(order=" << order_ << ", J=" << J_
     << ", d=" << dim_ << ", interactions=" << interaction_order_ << ", terms=" << n_terms() << ")";
  return os.str();
}

int select_Jn(long n, double p, int d) {
  if (n < 3) throw ConfigError("select_Jn: n must be at least 3");
  const double nn = static_cast<double>(n);
  return static_cast<int>(std::ceil(std::pow(nn / std::log(nn), 1.0 / (2.0 * p + d))));
}

PairValue SieveFunctionPair::evaluate(const double* x) const {
  Eigen::VectorXd phi(basis.n_terms());
  PairValue v;
  v.clamped = basis.evaluate(x, phi.data());
  const double a = std::max(eps, phi.dot(coeffs_alpha));
  const double e = phi.dot(coeffs_eta);
  v.alpha = std::clamp(a, std::max(eps, alpha_min), std::max(eps, alpha_max));
  v.eta = std::clamp(e, eta_min, eta_max);
  v.range_clamped = v.alpha != a || v.eta != e;
  return v;
}

double empirical_risk(const SieveFunctionPair& pair, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Divergence& spec, double rho) {
  const Eigen::MatrixXd phi = pair.basis.design(X);
  return kernels::erm_risk(spec, rho, pair.eps, phi, y, pair.coeffs_alpha, pair.coeffs_eta, false,
                           kernels::Exec::Parallel)
      .value;
}

ErmFit fit_erm(const SieveBasis& basis, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Divergence& spec,
               double rho, const ErmConfig& cfg) {
  const Eigen::Index n = X.rows();
  if (n == 0 || y.size() != n) throw DataError("fit_erm: empty fold or size mismatch");
  if (!(rho > 0.0)) throw ConfigError("fit_erm: rho must be positive");
  const auto exec = cfg.parallel ? kernels::Exec::Parallel : kernels::Exec::Serial;

  // Work on a standardized outcome; the loss is equivariant under
  // y -> s y + c with alpha -> s alpha, eta -> s eta - c.
  std::vector<double> yv(y.data(), y.data() + n);
  const double center = stats::median(yv);
  double scale = stats::iqr(yv) / 1.349;
  if (!(scale > 0.0)) scale = std::sqrt(stats::variance(yv));
  if (!(scale > 0.0)) scale = 1.0;
  const Eigen::VectorXd ys = (y.array() - center) / scale;
  const double eps_s = cfg.eps / scale;
  const Eigen::MatrixXd phi = basis.design(X);
  const Eigen::Index p = phi.cols();

  std::vector<double> ysv(ys.data(), ys.data() + n);
  optim::OptimizerConfig const_opt = cfg.opt;
  const auto constant = dual::solve_pointwise_dual(spec, rho, ysv, eps_s, const_opt);

  optim::SecondOrderObjective objective = [&](const Eigen::VectorXd& z, double& value, Eigen::VectorXd* g,
                                              Eigen::MatrixXd* h) {
    const auto ev = kernels::erm_risk(spec, rho, eps_s, phi, ys, z.head(p), z.tail(p), g || h, exec);
    // Keep alpha strictly above the floor on the fold: the floored loss is not
    // convex in the coefficients, the unfloored one is.
    if (!ev.finite || ev.floor_hits > 0) return false;
    value = ev.value;
    if (g) *g = ev.grad;
    if (h) *h = ev.hess;
    return true;
  };
  const double bound = cfg.coefficient_bound;
  optim::Box box{Eigen::VectorXd::Constant(2 * p, -bound), Eigen::VectorXd::Constant(2 * p, bound)};
  rng::Philox gen(rng::derive_seed(cfg.opt.seed, {0x65726dULL}));

  optim::Result best;
  best.value = std::numeric_limits<double>::infinity();
  double worst = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  for (int r = 0; r < std::max(1, cfg.opt.restarts); ++r) {
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(2 * p);
    z0(0) = std::clamp(constant.alpha, eps_s, bound);
    z0(p) = std::clamp(constant.eta, -bound, bound);
    if (r > 0) {
      z0(0) = std::clamp(constant.alpha * std::exp(0.3 * gen.normal()), eps_s, bound);
      z0(p) = std::clamp(constant.eta + 0.3 * gen.normal(), -bound, bound);
      double v;
      if (!objective(z0, v, nullptr, nullptr)) {
        z0(0) = std::clamp(constant.alpha, eps_s, bound);
        z0(p) = std::clamp(constant.eta, -bound, bound);
      }
    }
    auto res = optim::damped_newton(objective, z0, box, cfg.opt);
    iterations += res.iterations;
    worst = std::max(worst, res.value);
    if (res.value < best.value) best = res;
  }

  ErmFit fit;
  fit.pair.basis = basis;
  fit.pair.eps = cfg.eps;
  fit.pair.coeffs_alpha = scale * best.x.head(p);
  fit.pair.coeffs_eta = scale * best.x.tail(p);
  fit.pair.coeffs_eta(0) -= center;
  {
    const Eigen::MatrixXd& design = phi;
    const Eigen::VectorXd a = (design * fit.pair.coeffs_alpha).cwiseMax(cfg.eps);
    const Eigen::VectorXd e = design * fit.pair.coeffs_eta;
    fit.pair.alpha_min = a.minCoeff();
    fit.pair.alpha_max = a.maxCoeff();
    fit.pair.eta_min = e.minCoeff();
    fit.pair.eta_max = e.maxCoeff();
  }
  auto& dg = fit.diagnostics;
  dg.risk = scale * best.value - center;
  dg.constant_risk = scale * constant.value - center;
  dg.restart_spread = scale * (worst - best.value);
  dg.iterations = iterations + constant.iterations;
  dg.scale = scale;
  dg.center = center;
  dg.hit_coefficient_bound = (best.x.array().abs() >= bound * (1.0 - 1e-9)).any();
  dg.floor_hits = kernels::erm_risk(spec, rho, eps_s, phi, ys, best.x.head(p), best.x.tail(p), false, exec).floor_hits;
  return fit;
}

}  // namespace fsens::sieve
