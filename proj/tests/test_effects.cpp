#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fsens/effects.hpp"
#include "fsens/errors.hpp"
#include "fsens/simulation.hpp"

using namespace fsens;
using effects::CIKind;

TEST_CASE("two-sided Wald interval on the worked example") {
  const effects::PointEstimate p{1.0, 1.0, 100};
  const auto ci = effects::confidence_interval(p, 0.95, CIKind::TwoSidedBound);
  CHECK(ci.lo == doctest::Approx(0.804).epsilon(1e-3));
  CHECK(ci.hi == doctest::Approx(1.196).epsilon(1e-3));
  CHECK(ci.contains(1.0));
  CHECK_FALSE(ci.contains(1.2));
}

TEST_CASE("zero standard error collapses the interval") {
  const effects::PointEstimate p{0.3, 0.0, 50};
  const auto ci = effects::confidence_interval(p, 0.9, CIKind::TwoSidedBound);
  CHECK(ci.lo == 0.3);
  CHECK(ci.hi == 0.3);
}

TEST_CASE("intervals nest in the level and one-sided bounds are tighter") {
  const effects::PointEstimate p{-0.2, 2.0, 400};
  double prev_lo = 1e300, prev_hi = -1e300;
  for (double level : {0.6, 0.8, 0.9, 0.95, 0.99}) {
    const auto ci = effects::confidence_interval(p, level, CIKind::TwoSidedBound);
    CHECK(ci.lo < prev_lo);
    CHECK(ci.hi > prev_hi);
    prev_lo = ci.lo;
    prev_hi = ci.hi;
    const auto lcb = effects::confidence_interval(p, level, CIKind::OneSidedLower);
    const auto ucb = effects::confidence_interval(p, level, CIKind::OneSidedUpper);
    CHECK(lcb.lo > ci.lo);
    CHECK(ucb.hi < ci.hi);
    CHECK(std::isinf(lcb.hi));
    CHECK(std::isinf(ucb.lo));
  }
  const effects::PointEstimate q{0.5, 1.0, 400};
  const auto m = effects::mean_interval(p, q, 0.95);
  CHECK(m.lo == effects::confidence_interval(p, 0.95, CIKind::TwoSidedBound).lo);
  CHECK(m.hi == effects::confidence_interval(q, 0.95, CIKind::TwoSidedBound).hi);
}

TEST_CASE("invalid levels are configuration errors") {
  const effects::PointEstimate p{0.0, 1.0, 10};
  CHECK_THROWS_AS(effects::confidence_interval(p, 1.5, CIKind::TwoSidedBound), ConfigError);
  CHECK_THROWS_AS(effects::confidence_interval(p, 0.5, CIKind::TwoSidedBound), ConfigError);
  CHECK_THROWS_AS(effects::confidence_interval({0.0, std::nan(""), 10}, 0.9, CIKind::TwoSidedBound),
                  std::invalid_argument);
}

TEST_CASE("effect names round-trip") {
  for (auto e : {effects::Effect::ATC, effects::Effect::ATT, effects::Effect::ATE})
    CHECK(effects::effect_from_name(effects::effect_name(e)) == e);
  CHECK_THROWS_AS(effects::effect_from_name("cate"), ConfigError);
}

namespace {

struct Fixture {
  est::Dataset data;
  est::FoldPlan plan;
  est::EstimatorConfig cfg;
  est::BoundEstimate mu10_lo, mu10_hi, mu01_lo, mu01_hi;

  Fixture() {
    auto dgp = sim::DgpConfig::paper();
    dgp.n = 1500;
    dgp.seed = 21;
    data = sim::generate(dgp);
    cfg.regressor.trees = 40;
    plan = est::split_folds(data, 4);
    est::NuisanceCache cache;
    const auto kl = Divergence::kl();
    mu10_lo = est::estimate_bound(data, kl, 0.125, est::Target::Mu10Lower, cfg, plan, {}, &cache);
    mu10_hi = est::estimate_bound(data, kl, 0.125, est::Target::Mu10Upper, cfg, plan, {}, &cache);
    mu01_lo = est::estimate_bound(data, kl, 0.125, est::Target::Mu01Lower, cfg, plan, {}, &cache);
    mu01_hi = est::estimate_bound(data, kl, 0.125, est::Target::Mu01Upper, cfg, plan, {}, &cache);
  }
};

}  // namespace

TEST_CASE("effect bounds compose from stored components") {
  const Fixture fx;
  const auto set = effects::att_ate_bounds(fx.mu01_lo, fx.mu01_hi, fx.mu10_lo, fx.mu10_hi, fx.data);
  CHECK(set.atc_lower.point <= set.atc_upper.point);
  CHECK(set.att_lower.point <= set.att_upper.point);
  CHECK(set.ate_lower.point <= set.ate_upper.point);

  double y0 = 0.0, y1 = 0.0;
  for (auto i : fx.data.arm(0)) y0 += fx.data.Y(i);
  for (auto i : fx.data.arm(1)) y1 += fx.data.Y(i);
  y0 /= static_cast<double>(fx.data.arm(0).size());
  y1 /= static_cast<double>(fx.data.arm(1).size());
  CHECK(set.atc_lower.point == doctest::Approx(fx.mu10_lo.point - y0).epsilon(1e-12));
  CHECK(set.att_lower.point == doctest::Approx(y1 - fx.mu01_hi.point).epsilon(1e-12));
  const double p1 = set.ate_lower.p1;
  CHECK(set.ate_lower.point == doctest::Approx(p1 * set.att_lower.point + (1 - p1) * set.atc_lower.point).epsilon(1e-12));
  CHECK(set.ate_upper.point == doctest::Approx(p1 * set.att_upper.point + (1 - p1) * set.atc_upper.point).epsilon(1e-12));
  for (const auto* e : {&set.atc_lower, &set.att_upper, &set.ate_lower}) {
    CHECK(e->point == e->recompute_point());
    CHECK(e->sigma_hat > 0.0);
    // per-arm component means add up to the point, up to unequal fold sizes
    const double comp = e->treated_components.mean() + e->control_components.mean();
    CHECK(comp == doctest::Approx(e->point).epsilon(1e-3));
  }
}

TEST_CASE("ATC bounds flip exactly when the outcome is negated") {
  auto dgp = sim::DgpConfig::paper();
  dgp.n = 1200;
  dgp.seed = 22;
  auto data = sim::generate(dgp);
  est::EstimatorConfig cfg;
  cfg.regressor.trees = 30;
  const auto plan = est::split_folds(data, 4);
  const auto kl = Divergence::kl();
  const auto lo = est::estimate_bound(data, kl, 0.3, est::Target::Mu10Lower, cfg, plan);
  const auto hi = est::estimate_bound(data, kl, 0.3, est::Target::Mu10Upper, cfg, plan);
  const auto atc = effects::atc_bounds(lo, hi, data);
  auto neg = data;
  neg.Y = -neg.Y;
  const auto nlo = est::estimate_bound(neg, kl, 0.3, est::Target::Mu10Lower, cfg, plan);
  const auto nhi = est::estimate_bound(neg, kl, 0.3, est::Target::Mu10Upper, cfg, plan);
  const auto natc = effects::atc_bounds(nlo, nhi, neg);
  CHECK(natc.first.point == doctest::Approx(-atc.second.point).epsilon(1e-12));
  CHECK(natc.second.point == doctest::Approx(-atc.first.point).epsilon(1e-12));
  CHECK(natc.first.sigma_hat == doctest::Approx(atc.second.sigma_hat).epsilon(1e-12));
}

TEST_CASE("composition rejects estimates from different plans or targets") {
  const Fixture fx;
  const auto other_plan = est::split_folds(fx.data, 99);
  const auto other = est::estimate_bound(fx.data, Divergence::kl(), 0.125, est::Target::Mu10Upper, fx.cfg, other_plan);
  CHECK_THROWS_AS(effects::atc_bounds(fx.mu10_lo, other, fx.data), std::invalid_argument);
  CHECK_THROWS_AS(effects::atc_bounds(fx.mu10_hi, fx.mu10_lo, fx.data), std::invalid_argument);
}
