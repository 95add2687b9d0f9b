#include "fsens/effects.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fsens/errors.hpp"
#include "fsens/stats.hpp"

namespace fsens::effects {

namespace {

void require_same_plan(const est::BoundEstimate& a, const est::BoundEstimate& b) {
  if (a.n != b.n || a.plan_seed != b.plan_seed || a.fold_of != b.fold_of)
    throw std::invalid_argument("effect composition needs bound estimates from the same fold plan");
}

double arm_mean(const est::Dataset& data, int t) {
  double s = 0.0;
  Index c = 0;
  for (Index i = 0; i < data.n(); ++i)
    if (data.T(i) == t) {
      s += data.Y(i);
      ++c;
    }
  return s / static_cast<double>(c);
}

// Per-row view of a bound's components, indexed by dataset row.
Eigen::VectorXd by_row(const est::BoundEstimate& b) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.n);
  for (std::size_t k = 0; k < b.source_rows.size(); ++k) out(b.source_rows[k]) = b.d1(static_cast<Index>(k));
  for (std::size_t k = 0; k < b.target_rows.size(); ++k) out(b.target_rows[k]) = b.d0(static_cast<Index>(k));
  return out;
}

EffectBound assemble(Effect effect, Side side, const est::Dataset& data, const Eigen::VectorXd& row_components,
                     std::vector<std::string> names, std::vector<double> terms, std::vector<double> weights) {
  EffectBound e;
  e.effect = effect;
  e.side = side;
  e.n = data.n();
  e.treated_rows = data.arm(1);
  e.control_rows = data.arm(0);
  e.p1 = static_cast<double>(e.treated_rows.size()) / static_cast<double>(e.n);
  e.p0 = 1.0 - e.p1;
  e.treated_components.resize(static_cast<Index>(e.treated_rows.size()));
  e.control_components.resize(static_cast<Index>(e.control_rows.size()));
  for (std::size_t k = 0; k < e.treated_rows.size(); ++k)
    e.treated_components(static_cast<Index>(k)) = row_components(e.treated_rows[k]);
  for (std::size_t k = 0; k < e.control_rows.size(); ++k)
    e.control_components(static_cast<Index>(k)) = row_components(e.control_rows[k]);
  e.term_names = std::move(names);
  e.terms = std::move(terms);
  e.weights = std::move(weights);
  e.point = e.recompute_point();
  e.sigma_hat = std::sqrt(est::variance_estimate(e.treated_components, e.control_components, e.p1, e.p0));
  return e;
}

Eigen::VectorXd arm_indicator_times_y(const est::Dataset& data, int t) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(data.n());
  for (Index i = 0; i < data.n(); ++i)
    if (data.T(i) == t) out(i) = data.Y(i);
  return out;
}

}  // namespace

std::string effect_name(Effect e) {
  switch (e) {
    case Effect::ATC: return "atc";
    case Effect::ATT: return "att";
    case Effect::ATE: return "ate";
  }
  return "?";
}

Effect effect_from_name(const std::string& name) {
  for (Effect e : {Effect::ATC, Effect::ATT, Effect::ATE})
    if (effect_name(e) == name) return e;
  throw ConfigError("unknown effect '" + name + "' (expected atc, att or ate)");
}

double EffectBound::recompute_point() const {
  double s = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) s += weights[k] * terms[k];
  return s;
}

std::pair<EffectBound, EffectBound> atc_bounds(const est::BoundEstimate& mu10_lower, const est::BoundEstimate& mu10_upper,
                                               const est::Dataset& data) {
  require_same_plan(mu10_lower, mu10_upper);
  if (mu10_lower.target != est::Target::Mu10Lower || mu10_upper.target != est::Target::Mu10Upper)
    throw std::invalid_argument("atc_bounds expects mu10_lower and mu10_upper estimates");
  const double y0 = arm_mean(data, 0);
  const Eigen::VectorXd y_control = arm_indicator_times_y(data, 0);
  auto lower = assemble(Effect::ATC, Side::Lower, data, by_row(mu10_lower) - y_control, {"mu10_lower", "mean_y_control"},
                        {mu10_lower.point, y0}, {1.0, -1.0});
  auto upper = assemble(Effect::ATC, Side::Upper, data, by_row(mu10_upper) - y_control, {"mu10_upper", "mean_y_control"},
                        {mu10_upper.point, y0}, {1.0, -1.0});
  return {lower, upper};
}

EffectSet att_ate_bounds(const est::BoundEstimate& mu01_lower, const est::BoundEstimate& mu01_upper,
                         const est::BoundEstimate& mu10_lower, const est::BoundEstimate& mu10_upper,
                         const est::Dataset& data) {
  require_same_plan(mu01_lower, mu01_upper);
  require_same_plan(mu01_lower, mu10_lower);
  require_same_plan(mu01_lower, mu10_upper);
  if (mu01_lower.target != est::Target::Mu01Lower || mu01_upper.target != est::Target::Mu01Upper)
    throw std::invalid_argument("att_ate_bounds expects mu01_lower and mu01_upper estimates");
  EffectSet out;
  std::tie(out.atc_lower, out.atc_upper) = atc_bounds(mu10_lower, mu10_upper, data);
  const double y1 = arm_mean(data, 1);
  const Eigen::VectorXd y_treated = arm_indicator_times_y(data, 1);
  out.att_lower = assemble(Effect::ATT, Side::Lower, data, y_treated - by_row(mu01_upper), {"mean_y_treated", "mu01_upper"},
                           {y1, mu01_upper.point}, {1.0, -1.0});
  out.att_upper = assemble(Effect::ATT, Side::Upper, data, y_treated - by_row(mu01_lower), {"mean_y_treated", "mu01_lower"},
                           {y1, mu01_lower.point}, {1.0, -1.0});
  const double p1 = out.att_lower.p1, p0 = out.att_lower.p0;
  auto combine = [&](const EffectBound& att, const EffectBound& atc, Side side) {
    Eigen::VectorXd rows(data.n());
    for (std::size_t k = 0; k < att.treated_rows.size(); ++k)
      rows(att.treated_rows[k]) = p1 * att.treated_components(static_cast<Index>(k)) + p0 * atc.treated_components(static_cast<Index>(k));
    for (std::size_t k = 0; k < att.control_rows.size(); ++k)
      rows(att.control_rows[k]) = p1 * att.control_components(static_cast<Index>(k)) + p0 * atc.control_components(static_cast<Index>(k));
    return assemble(Effect::ATE, side, data, rows, {"att", "atc"}, {att.point, atc.point}, {p1, p0});
  };
  out.ate_lower = combine(out.att_lower, out.atc_lower, Side::Lower);
  out.ate_upper = combine(out.att_upper, out.atc_upper, Side::Upper);
  return out;
}

PointEstimate summary(const est::BoundEstimate& b) { return {b.point, b.sigma_hat, b.n}; }
PointEstimate summary(const EffectBound& b) { return {b.point, b.sigma_hat, b.n}; }

ConfidenceInterval confidence_interval(const PointEstimate& b, double level, CIKind kind) {
  if (!(level > 0.5 && level < 1.0)) throw ConfigError("confidence level must lie in (0.5, 1)");
  if (!std::isfinite(b.sigma_hat) || b.sigma_hat < 0.0) throw std::invalid_argument("confidence interval needs a finite sigma_hat");
  if (b.n <= 0) throw std::invalid_argument("confidence interval needs a positive sample size");
  const double se = b.sigma_hat / std::sqrt(static_cast<double>(b.n));
  const double inf = std::numeric_limits<double>::infinity();
  ConfidenceInterval ci;
  ci.kind = kind;
  ci.level = level;
  switch (kind) {
    case CIKind::TwoSidedBound:
      ci.lo = b.point + stats::normal_quantile((1.0 - level) / 2.0) * se;
      ci.hi = b.point + stats::normal_quantile((1.0 + level) / 2.0) * se;
      break;
    case CIKind::OneSidedLower:
      ci.lo = b.point + stats::normal_quantile(1.0 - level) * se;
      ci.hi = inf;
      break;
    case CIKind::OneSidedUpper:
      ci.lo = -inf;
      ci.hi = b.point + stats::normal_quantile(level) * se;
      break;
    case CIKind::MeanInterval:
      throw std::invalid_argument("use mean_interval for the interval of the mean");
  }
  return ci;
}

ConfidenceInterval mean_interval(const PointEstimate& lower, const PointEstimate& upper, double level) {
  ConfidenceInterval ci;
  ci.kind = CIKind::MeanInterval;
  ci.level = level;
  ci.lo = confidence_interval(lower, level, CIKind::TwoSidedBound).lo;
  ci.hi = confidence_interval(upper, level, CIKind::TwoSidedBound).hi;
  return ci;
}

}  // namespace fsens::effects
