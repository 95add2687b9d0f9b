#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fsens/divergence.hpp"
#include "fsens/effects.hpp"
#include "fsens/estimator.hpp"

namespace fsens::sens {

// Confidence bounds of an effect over a grid of budgets. lcb is the
// two-sided lower end around the effect's lower bound, ucb the upper end
// around its upper bound, so [lcb, ucb] is a level-`level` interval for the
// effect at each rho.
struct SensitivityCurve {
  effects::Effect effect = effects::Effect::ATC;
  double level = 0.95;
  std::vector<double> rho_grid;
  std::vector<double> lcb;
  std::vector<double> ucb;
  std::vector<double> lcb_monotone;
  std::vector<double> ucb_monotone;
  std::vector<double> lower_points;
  std::vector<double> upper_points;
  std::vector<bool> ok;             // false where the estimate failed (NaN gap)
  std::vector<std::string> errors;  // per grid point, empty when ok

  std::size_t size() const { return rho_grid.size(); }
};

struct CurveConfig {
  double level = 0.95;
  // One fold split for the whole grid. When false every rho gets its own
  // split seeded from (plan_seed, grid index), for seed-sensitivity checks.
  bool shared_plan = true;
  std::uint64_t plan_seed = 1;
  bool parallel = true;
};

// Throws ConfigError for an empty, non-ascending or non-positive grid and for
// levels outside (0.5, 1). Estimation failures at single rho values are
// recorded as gaps.
SensitivityCurve compute_curve(const est::Dataset& data, const Divergence& spec, const std::vector<double>& rho_grid,
                               effects::Effect effect, const est::EstimatorConfig& est_cfg, const CurveConfig& cfg = {});

// Fills lcb_monotone with the running minimum of lcb and ucb_monotone with the
// running maximum of ucb along increasing rho. Gaps carry the running value.
void monotonize(SensitivityCurve& curve);

struct Inversion {
  std::optional<double> rho_hat;
  std::optional<double> previous;  // grid neighbour below rho_hat
  std::optional<double> next;      // grid neighbour above rho_hat
  std::size_t index = 0;
};

// Smallest grid rho whose monotone interval contains the threshold.
Inversion invert(const SensitivityCurve& curve, double threshold);

}  // namespace fsens::sens
