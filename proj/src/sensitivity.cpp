#include "fsens/sensitivity.hpp"

#include <cmath>
#include <limits>

#include "fsens/errors.hpp"
#include "fsens/rng.hpp"

namespace fsens::sens {

namespace {

constexpr std::uint64_t kTagSweep = 0x7377ULL;

struct GridPoint {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  double lower_point = std::numeric_limits<double>::quiet_NaN();
  double upper_point = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

std::pair<effects::EffectBound, effects::EffectBound> effect_pair(const est::Dataset& data, const Divergence& spec,
                                                                  double rho, effects::Effect effect,
                                                                  const est::EstimatorConfig& cfg,
                                                                  const est::FoldPlan& plan, est::NuisanceCache& cache) {
  using est::Target;
  auto bound = [&](Target t) { return est::estimate_bound(data, spec, rho, t, cfg, plan, {}, &cache); };
  const auto lo10 = bound(Target::Mu10Lower);
  const auto hi10 = bound(Target::Mu10Upper);
  if (effect == effects::Effect::ATC) return effects::atc_bounds(lo10, hi10, data);
  const auto set = effects::att_ate_bounds(bound(Target::Mu01Lower), bound(Target::Mu01Upper), lo10, hi10, data);
  if (effect == effects::Effect::ATT) return {set.att_lower, set.att_upper};
  return {set.ate_lower, set.ate_upper};
}

}  // namespace

SensitivityCurve compute_curve(const est::Dataset& data, const Divergence& spec, const std::vector<double>& rho_grid,
                               effects::Effect effect, const est::EstimatorConfig& est_cfg, const CurveConfig& cfg) {
  if (rho_grid.empty()) throw ConfigError("sensitivity curve needs a non-empty rho grid");
  for (std::size_t k = 0; k < rho_grid.size(); ++k) {
    if (!(rho_grid[k] > 0.0) || !std::isfinite(rho_grid[k])) throw ConfigError("rho grid values must be positive");
    if (k > 0 && !(rho_grid[k] > rho_grid[k - 1])) throw ConfigError("rho grid must be strictly ascending without duplicates");
  }
  if (!(cfg.level > 0.5 && cfg.level < 1.0)) throw ConfigError("confidence level must lie in (0.5, 1)");
  data.validate();

  const auto shared = est::split_folds(data, cfg.plan_seed);
  est::NuisanceCache cache;
  const long m = static_cast<long>(rho_grid.size());
  std::vector<GridPoint> points(rho_grid.size());
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
  for (long k = 0; k < m; ++k) {
    GridPoint& gp = points[static_cast<std::size_t>(k)];
    try {
      const auto plan = cfg.shared_plan ? shared
                                        : est::split_folds(data, rng::derive_seed(cfg.plan_seed, {kTagSweep, static_cast<std::uint64_t>(k)}));
      const auto [lower, upper] = effect_pair(data, spec, rho_grid[static_cast<std::size_t>(k)], effect, est_cfg, plan, cache);
      const auto ci = effects::mean_interval(effects::summary(lower), effects::summary(upper), cfg.level);
      gp.lo = ci.lo;
      gp.hi = ci.hi;
      gp.lower_point = lower.point;
      gp.upper_point = upper.point;
    } catch (const std::exception& e) {
      gp.error = e.what();
    }
  }

  SensitivityCurve curve;
  curve.effect = effect;
  curve.level = cfg.level;
  curve.rho_grid = rho_grid;
  for (const auto& gp : points) {
    curve.lcb.push_back(gp.lo);
    curve.ucb.push_back(gp.hi);
    curve.lower_points.push_back(gp.lower_point);
    curve.upper_points.push_back(gp.upper_point);
    curve.ok.push_back(gp.error.empty());
    curve.errors.push_back(gp.error);
  }
  monotonize(curve);
  return curve;
}

void monotonize(SensitivityCurve& curve) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  curve.lcb_monotone.assign(curve.lcb.size(), nan);
  curve.ucb_monotone.assign(curve.ucb.size(), nan);
  double lo = nan, hi = nan;
  for (std::size_t k = 0; k < curve.lcb.size(); ++k) {
    if (std::isfinite(curve.lcb[k])) lo = std::isnan(lo) ? curve.lcb[k] : std::min(lo, curve.lcb[k]);
    if (std::isfinite(curve.ucb[k])) hi = std::isnan(hi) ? curve.ucb[k] : std::max(hi, curve.ucb[k]);
    curve.lcb_monotone[k] = lo;
    curve.ucb_monotone[k] = hi;
  }
}

Inversion invert(const SensitivityCurve& curve, double threshold) {
  Inversion out;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const double lo = curve.lcb_monotone[k], hi = curve.ucb_monotone[k];
    if (!std::isfinite(lo) || !std::isfinite(hi)) continue;
    if (lo <= threshold && threshold <= hi) {
      out.rho_hat = curve.rho_grid[k];
      out.index = k;
      if (k > 0) out.previous = curve.rho_grid[k - 1];
      if (k + 1 < curve.size()) out.next = curve.rho_grid[k + 1];
      return out;
    }
  }
  return out;
}

}  // namespace fsens::sens
