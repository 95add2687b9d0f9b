#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fsens/estimator.hpp"

namespace fsens::effects {

using est::Index;

enum class Effect { ATC, ATT, ATE };
enum class Side { Lower, Upper };
std::string effect_name(Effect e);
Effect effect_from_name(const std::string& name);

// A bound on a treatment effect composed from counterfactual-mean bounds and
// observed arm means. Per-unit components are stored by arm so that the
// variance follows the same plug-in formula as a single bound.
struct EffectBound {
  Effect effect = Effect::ATC;
  Side side = Side::Lower;
  double point = 0.0;
  double sigma_hat = 0.0;
  Index n = 0;
  Eigen::VectorXd treated_components;
  Eigen::VectorXd control_components;
  std::vector<Index> treated_rows;
  std::vector<Index> control_rows;
  double p1 = 0.0;
  double p0 = 0.0;
  // point = sum_k weights[k] * terms[k]; terms are constituent bound points and observed means.
  std::vector<std::string> term_names;
  std::vector<double> terms;
  std::vector<double> weights;

  double standard_error() const { return sigma_hat / std::sqrt(static_cast<double>(n)); }
  double recompute_point() const;
};

// lower = mu10_lower - mean(Y | T = 0), upper = mu10_upper - mean(Y | T = 0).
std::pair<EffectBound, EffectBound> atc_bounds(const est::BoundEstimate& mu10_lower, const est::BoundEstimate& mu10_upper,
                                               const est::Dataset& data);

struct EffectSet {
  EffectBound att_lower, att_upper;
  EffectBound atc_lower, atc_upper;
  EffectBound ate_lower, ate_upper;
};

// ATT lower = mean(Y | T = 1) - mu01_upper (upper uses mu01_lower);
// ATE = p1_hat * ATT + p0_hat * ATC side by side.
EffectSet att_ate_bounds(const est::BoundEstimate& mu01_lower, const est::BoundEstimate& mu01_upper,
                         const est::BoundEstimate& mu10_lower, const est::BoundEstimate& mu10_upper,
                         const est::Dataset& data);

enum class CIKind { TwoSidedBound, OneSidedLower, OneSidedUpper, MeanInterval };

struct ConfidenceInterval {
  CIKind kind = CIKind::TwoSidedBound;
  double level = 0.95;
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct PointEstimate {
  double point = 0.0;
  double sigma_hat = 0.0;
  Index n = 0;
};
PointEstimate summary(const est::BoundEstimate& b);
PointEstimate summary(const EffectBound& b);

// Wald intervals: two-sided [p + z_{(1-L)/2} se, p + z_{(1+L)/2} se];
// one-sided lower [p + z_{1-L} se, inf), upper (-inf, p + z_L se]. Levels
// must lie in (0.5, 1); sigma_hat must be finite and nonnegative.
ConfidenceInterval confidence_interval(const PointEstimate& b, double level, CIKind kind);
// [lower two-sided lo, upper two-sided hi].
ConfidenceInterval mean_interval(const PointEstimate& lower, const PointEstimate& upper, double level);

}  // namespace fsens::effects
