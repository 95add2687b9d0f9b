#include "fsens/estimator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fsens/dual.hpp"
#include "fsens/errors.hpp"
#include "fsens/rng.hpp"
#include "fsens/stats.hpp"

namespace fsens::est {

namespace {

constexpr std::uint64_t kTagFold = 0x666f6c64ULL;
constexpr std::uint64_t kTagPropensity = 0x70726f70ULL;
constexpr std::uint64_t kTagErm = 0x65726dULL;
constexpr std::uint64_t kTagH = 0x68ULL;
constexpr Index kMinRowsPerTerm = 10;

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, const std::vector<Index>& idx) {
  Eigen::MatrixXd out(static_cast<Index>(idx.size()), X.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = X.row(idx[k]);
  return out;
}

Eigen::VectorXd entries_of(const Eigen::VectorXd& v, const std::vector<Index>& idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = v(idx[k]);
  return out;
}

double plain_mean(const Eigen::VectorXd& v) { return v.size() ? v.mean() : 0.0; }

double plug_in_variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().mean();
}

// Evaluates (alpha, eta) at each row of X, either from the fitted sieve or the frozen hook.
struct Theta {
  const sieve::SieveFunctionPair* pair = nullptr;
  const std::function<std::pair<double, double>(const double*, bool)>* frozen = nullptr;
  bool upper = false;

  void at(const Eigen::MatrixXd& X, Eigen::VectorXd& alpha, Eigen::VectorXd& eta) const {
    alpha.resize(X.rows());
    eta.resize(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
      const Eigen::VectorXd x = X.row(i);
      if (frozen) {
        const auto [a, e] = (*frozen)(x.data(), upper);
        alpha(i) = a;
        eta(i) = e;
      } else {
        const auto v = pair->evaluate(x.data());
        alpha(i) = v.alpha;
        eta(i) = v.eta;
      }
    }
  }
};

}  // namespace

std::vector<Index> Dataset::arm(int t) const {
  std::vector<Index> out;
  for (Index i = 0; i < T.size(); ++i)
    if (T(i) == t) out.push_back(i);
  return out;
}

void Dataset::validate() const {
  if (X.rows() == 0 || X.cols() == 0) throw DataError("dataset: no rows or no covariates");
  if (T.size() != X.rows() || Y.size() != X.rows()) throw DataError("dataset: X, t and y lengths differ");
  if (!X.allFinite() || !Y.allFinite()) throw DataError("dataset: non-finite covariate or outcome");
  for (Index i = 0; i < T.size(); ++i)
    if (T(i) != 0 && T(i) != 1) throw DataError("dataset: treatment must be 0 or 1 (row " + std::to_string(i) + ")");
  const auto treated = (T.array() == 1).count();
  if (treated == 0 || treated == T.size()) throw DataError("dataset: both treatment arms must be nonempty");
}

std::string target_name(Target t) {
  switch (t) {
    case Target::Mu10Lower: return "mu10_lower";
    case Target::Mu10Upper: return "mu10_upper";
    case Target::Mu01Lower: return "mu01_lower";
    case Target::Mu01Upper: return "mu01_upper";
  }
  return "?";
}

Target target_from_name(const std::string& name) {
  for (Target t : {Target::Mu10Lower, Target::Mu10Upper, Target::Mu01Lower, Target::Mu01Upper})
    if (target_name(t) == name) return t;
  throw ConfigError("unknown target '" + name + "' (expected mu10_lower, mu10_upper, mu01_lower or mu01_upper)");
}

FoldPlan split_folds(const Dataset& data, std::uint64_t seed) {
  FoldPlan plan;
  plan.seed = seed;
  plan.fold_of.assign(static_cast<std::size_t>(data.n()), -1);
  for (int t : {1, 0}) {
    std::vector<Index> idx = data.arm(t);
    if (idx.size() < 3) throw DataError("split_folds: each arm needs at least 3 units");
    rng::Philox gen(rng::derive_seed(seed, {kTagFold, static_cast<std::uint64_t>(t)}));
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[gen.below(i + 1)]);
    auto& folds = t == 1 ? plan.treated : plan.control;
    const std::size_t base = idx.size() / 3, extra = idx.size() % 3;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t size = base + (k < extra ? 1 : 0);
      folds[k].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
      std::sort(folds[k].begin(), folds[k].end());
      for (Index i : folds[k]) plan.fold_of[static_cast<std::size_t>(i)] = static_cast<int>(k);
      pos += size;
    }
  }
  return plan;
}

double variance_estimate(const Eigen::VectorXd& d1, const Eigen::VectorXd& d0, double p1_hat, double p0_hat) {
  if (d1.size() < 2 || d0.size() < 2) throw std::invalid_argument("variance_estimate: each arm needs two components");
  if (!(p1_hat > 0.0) || !(p0_hat > 0.0)) throw std::invalid_argument("variance_estimate: arm shares must be positive");
  return plug_in_variance(d1) / p1_hat + plug_in_variance(d0) / p0_hat;
}

double BoundEstimate::recompute_point() const {
  std::array<double, 3> s1{}, s0{};
  std::array<int, 3> c1{}, c0{};
  for (std::size_t k = 0; k < source_rows.size(); ++k) {
    const int f = fold_of[static_cast<std::size_t>(source_rows[k])];
    s1[f] += d1(static_cast<Index>(k));
    ++c1[f];
  }
  for (std::size_t k = 0; k < target_rows.size(); ++k) {
    const int f = fold_of[static_cast<std::size_t>(target_rows[k])];
    s0[f] += d0(static_cast<Index>(k));
    ++c0[f];
  }
  double total = 0.0;
  for (int f = 0; f < 3; ++f) total += s1[f] / c1[f] + s0[f] / c0[f];
  return total / 3.0;
}

double BoundEstimate::recompute_sigma() const { return std::sqrt(variance_estimate(d1, d0, p_source, p_target)); }

bool NuisanceCache::lookup(std::uint64_t plan_seed, int source, int fold, Eigen::VectorXd& r, double& p1) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find({plan_seed, source, fold});
  if (it == entries_.end()) return false;
  r = it->second.first;
  p1 = it->second.second;
  return true;
}

void NuisanceCache::store(std::uint64_t plan_seed, int source, int fold, const Eigen::VectorXd& r, double p1) {
  std::lock_guard lock(mutex_);
  entries_[{plan_seed, source, fold}] = {r, p1};
}

BoundEstimate estimate_bound(const Dataset& data, const Divergence& spec, double rho, Target target,
                             const EstimatorConfig& cfg) {
  return estimate_bound(data, spec, rho, target, cfg, split_folds(data, cfg.seed));
}

BoundEstimate estimate_bound(const Dataset& data, const Divergence& spec, double rho, Target target,
                             const EstimatorConfig& cfg, const FoldPlan& plan, const EstimatorHooks& hooks,
                             NuisanceCache* cache) {
  data.validate();
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("estimate_bound: rho must be positive and finite");
  if (!(cfg.eps > 0.0)) throw ConfigError("estimate_bound: eps must be positive");
  if (plan.fold_of.size() != static_cast<std::size_t>(data.n())) throw DataError("estimate_bound: fold plan does not match the dataset");

  const int src = source_arm(target);
  const bool upper = is_upper(target);
  const double sign = upper ? -1.0 : 1.0;  // the lower bound of sign * Y is computed
  const Eigen::VectorXd y = sign * data.Y;
  const auto& src_folds = plan.arm(src);
  const auto& tgt_folds = plan.arm(1 - src);

  std::vector<sieve::Interval> domain(static_cast<std::size_t>(data.d()));
  for (int j = 0; j < data.d(); ++j) {
    domain[static_cast<std::size_t>(j)] = {data.X.col(j).minCoeff(), data.X.col(j).maxCoeff()};
    if (!(domain[static_cast<std::size_t>(j)].lo < domain[static_cast<std::size_t>(j)].hi))
      domain[static_cast<std::size_t>(j)].hi = domain[static_cast<std::size_t>(j)].lo + 1.0;
  }

  BoundEstimate est;
  est.target = target;
  est.rho = rho;
  est.n = data.n();
  est.fold_of = plan.fold_of;
  est.plan_seed = plan.seed;
  for (int k = 0; k < 3; ++k) {
    est.source_rows.insert(est.source_rows.end(), src_folds[k].begin(), src_folds[k].end());
    est.target_rows.insert(est.target_rows.end(), tgt_folds[k].begin(), tgt_folds[k].end());
  }
  est.d1.resize(static_cast<Index>(est.source_rows.size()));
  est.d0.resize(static_cast<Index>(est.target_rows.size()));
  est.p_source = static_cast<double>(est.source_rows.size()) / static_cast<double>(est.n);
  est.p_target = static_cast<double>(est.target_rows.size()) / static_cast<double>(est.n);

  Index src_offset = 0, tgt_offset = 0;
  for (int j = 0; j < 3; ++j) {
    const int fit = (j + 1) % 3, reg = (j + 2) % 3;
    FoldDiagnostics diag;
    diag.fold = j;
    const auto& eval_src = src_folds[j];
    const auto& eval_tgt = tgt_folds[j];
    diag.n_fit = static_cast<Index>(src_folds[fit].size());
    diag.n_reg = static_cast<Index>(src_folds[reg].size());
    diag.n_eval_source = static_cast<Index>(eval_src.size());
    diag.n_eval_target = static_cast<Index>(eval_tgt.size());
    const Eigen::MatrixXd X_src = rows_of(data.X, eval_src);
    const Eigen::MatrixXd X_tgt = rows_of(data.X, eval_tgt);
    const std::string where = " (" + target_name(target) + ", fold " + std::to_string(j) + ")";

    try {
      // Covariate shift from the source arm to the target arm on the evaluation fold.
      Eigen::VectorXd r(X_src.rows());
      double p1 = static_cast<double>(src_folds[fit].size()) /
                  static_cast<double>(src_folds[fit].size() + tgt_folds[fit].size());
      if (hooks.r_one) {
        r.setOnes();
      } else if (hooks.oracle_r) {
        for (Index i = 0; i < X_src.rows(); ++i) {
          const Eigen::VectorXd x = X_src.row(i);
          r(i) = hooks.oracle_r(x.data());
        }
      } else if (!(cache && cache->lookup(plan.seed, src, j, r, p1))) {
        std::vector<Index> fit_rows = src_folds[fit];
        fit_rows.insert(fit_rows.end(), tgt_folds[fit].begin(), tgt_folds[fit].end());
        Eigen::VectorXi label(static_cast<Index>(fit_rows.size()));
        for (std::size_t k = 0; k < fit_rows.size(); ++k) label(static_cast<Index>(k)) = k < src_folds[fit].size() ? 1 : 0;
        auto e = nuisance::fit_propensity(rows_of(data.X, fit_rows), label, cfg.regressor,
                                          rng::derive_seed(plan.seed, {kTagPropensity, static_cast<std::uint64_t>(src),
                                                                       static_cast<std::uint64_t>(j)}),
                                          cfg.clip);
        for (Index i = 0; i < X_src.rows(); ++i) {
          const Eigen::VectorXd x = X_src.row(i);
          r(i) = nuisance::shift_ratio(e(x.data()), p1);
        }
        if (cache) cache->store(plan.seed, src, j, r, p1);
      }
      diag.p1_hat = p1;

      // Dual parameters from the ERM on the fitting fold (or the frozen hook).
      sieve::ErmFit erm;
      Theta theta;
      theta.upper = upper;
      if (hooks.frozen_theta) {
        theta.frozen = &hooks.frozen_theta;
      } else {
        const auto& fit_rows = src_folds[fit];
        const Index n_fit = static_cast<Index>(fit_rows.size());
        int J = cfg.sieve.J >= 0 ? cfg.sieve.J : sieve::select_Jn(std::max<Index>(3, n_fit), cfg.sieve.smoothness, data.d());
        auto basis = sieve::build_basis(cfg.sieve.kind, cfg.sieve.order, J, data.d(), domain, cfg.sieve.interaction_order);
        // The schedule only bounds J asymptotically. On small folds a rich
        // basis lets alpha collapse onto the floor at individual points, so
        // an automatic J is cut back until each term has kMinRowsPerTerm rows.
        if (cfg.sieve.J < 0) {
          const int chosen = J;
          while (J > 0 && basis.n_terms() * kMinRowsPerTerm > n_fit) {
            --J;
            basis = sieve::build_basis(cfg.sieve.kind, cfg.sieve.order, J, data.d(), domain, cfg.sieve.interaction_order);
          }
          if (J != chosen)
            est.warnings.push_back("sieve J reduced from " + std::to_string(chosen) + " to " + std::to_string(J) +
                                    " for a fitting fold of " + std::to_string(n_fit) + " rows in fold " + std::to_string(j));
        }
        sieve::ErmConfig ecfg;
        ecfg.eps = cfg.eps;
        ecfg.opt = cfg.opt;
        ecfg.opt.seed = rng::derive_seed(plan.seed, {kTagErm, static_cast<std::uint64_t>(src),
                                                     static_cast<std::uint64_t>(j)});
        ecfg.parallel = cfg.parallel;
        erm = sieve::fit_erm(basis, rows_of(data.X, fit_rows), entries_of(y, fit_rows), spec, rho, ecfg);
        theta.pair = &erm.pair;
        diag.erm_risk = sign * erm.diagnostics.risk;
        diag.constant_risk = sign * erm.diagnostics.constant_risk;
        diag.floor_hits = erm.diagnostics.floor_hits;
        diag.hit_coefficient_bound = erm.diagnostics.hit_coefficient_bound;
        diag.sieve_terms = basis.n_terms();
      }

      auto loss_values = [&](const Eigen::MatrixXd& X, const std::vector<Index>& rows) {
        Eigen::VectorXd alpha, eta;
        theta.at(X, alpha, eta);
        Eigen::VectorXd H(X.rows());
        for (Index i = 0; i < X.rows(); ++i) H(i) = dual::dual_loss(spec, rho, alpha(i), eta(i), y(rows[static_cast<std::size_t>(i)]));
        return H;
      };

      // h: regression of the loss on covariates over the regression fold.
      std::unique_ptr<nuisance::Regressor> h_fit;
      std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> h_eval = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd::Zero(X.rows()).eval();
      };
      if (hooks.oracle_outcome) {
        h_eval = [&](const Eigen::MatrixXd& X) {
          const auto& gh = stats::gauss_hermite(80);
          Eigen::VectorXd alpha, eta, out(X.rows());
          theta.at(X, alpha, eta);
          for (Index i = 0; i < X.rows(); ++i) {
            const Eigen::VectorXd x = X.row(i);
            const auto law = hooks.oracle_outcome(x.data());
            double acc = 0.0;
            for (std::size_t k = 0; k < gh.nodes.size(); ++k)
              acc += gh.weights[k] * dual::dual_loss(spec, rho, alpha(i), eta(i), sign * (law.mean + law.sd * gh.nodes[k]));
            out(i) = acc;
          }
          return out;
        };
      } else if (!hooks.h_zero) {
        const auto& reg_rows = src_folds[reg];
        const Eigen::MatrixXd X_reg = rows_of(data.X, reg_rows);
        const Eigen::VectorXd H_reg = loss_values(X_reg, reg_rows);
        if (!H_reg.allFinite()) throw NumericalError("non-finite dual loss on the regression fold");
        h_fit = nuisance::fit_h(X_reg, H_reg, cfg.regressor,
                                rng::derive_seed(plan.seed, {kTagH, static_cast<std::uint64_t>(src),
                                                             static_cast<std::uint64_t>(j)}));
        h_eval = [&](const Eigen::MatrixXd& X) { return h_fit->predict(X); };
      }

      const Eigen::VectorXd H_src = loss_values(X_src, eval_src);
      if (!H_src.allFinite()) throw NumericalError("non-finite dual loss on the evaluation fold");
      const Eigen::VectorXd h_src = h_eval(X_src);
      const Eigen::VectorXd h_tgt = h_eval(X_tgt);
      // The bound is -mu for the sign-adjusted outcome, i.e. -sign * mu for Y.
      const Eigen::VectorXd c1 = -sign * (r.array() * (H_src - h_src).array()).matrix();
      const Eigen::VectorXd c0 = -sign * h_tgt;
      est.d1.segment(src_offset, c1.size()) = c1;
      est.d0.segment(tgt_offset, c0.size()) = c0;
      src_offset += c1.size();
      tgt_offset += c0.size();
      est.fold_values[static_cast<std::size_t>(j)] = plain_mean(c1) + plain_mean(c0);
    } catch (const NumericalError& e) {
      throw NumericalError(e.what() + where);
    } catch (const DataError& e) {
      throw DataError(e.what() + where);
    }
    if (diag.floor_hits > 0) est.warnings.push_back("alpha at the eps floor on " + std::to_string(diag.floor_hits) + " fitting points in fold " + std::to_string(j));
    if (diag.hit_coefficient_bound) est.warnings.push_back("sieve coefficient at the box bound in fold " + std::to_string(j));
    est.diagnostics.push_back(diag);
  }
  est.point = est.recompute_point();
  est.sigma_hat = std::sqrt(variance_estimate(est.d1, est.d0, est.p_source, est.p_target));
  return est;
}

Eigen::VectorXd oracle_influence(const Dataset& data, const OracleFunctions& oracle, Target target) {
  const int src = source_arm(target);
  const double n = static_cast<double>(data.n());
  const double ps = static_cast<double>((data.T.array() == src).count()) / n;
  const double pt = 1.0 - ps;
  if (!(ps > 0.0) || !(pt > 0.0)) throw std::invalid_argument("oracle_influence: both arms must be present");
  Eigen::VectorXd phi(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const Eigen::VectorXd x = data.X.row(i);
    const double h = oracle.h(x.data());
    phi(i) = data.T(i) == src ? oracle.r(x.data()) * (oracle.H(x.data(), data.Y(i)) - h) / ps : h / pt;
  }
  return phi;
}

}  // namespace fsens::est
