#include <doctest.h>

#include <cmath>

#include "fsens/errors.hpp"
#include "fsens/sensitivity.hpp"
#include "fsens/simulation.hpp"

using namespace fsens;

namespace {

sens::SensitivityCurve manual(std::vector<double> rho, std::vector<double> lcb, std::vector<double> ucb) {
  sens::SensitivityCurve c;
  c.rho_grid = std::move(rho);
  c.lcb = std::move(lcb);
  c.ucb = std::move(ucb);
  c.ok.assign(c.rho_grid.size(), true);
  sens::monotonize(c);
  return c;
}

}  // namespace

TEST_CASE("monotonize takes running extremes and keeps the raw arrays") {
  const auto c = manual({0.1, 0.2, 0.3}, {1.0, 1.2, 0.8}, {0.5, 0.4, 0.9});
  CHECK(c.lcb_monotone == std::vector<double>{1.0, 1.0, 0.8});
  CHECK(c.ucb_monotone == std::vector<double>{0.5, 0.5, 0.9});
  CHECK(c.lcb == std::vector<double>{1.0, 1.2, 0.8});
  CHECK(c.ucb == std::vector<double>{0.5, 0.4, 0.9});
  const auto fixed = manual({0.1, 0.2}, {2.0, 1.0}, {3.0, 4.0});
  CHECK(fixed.lcb_monotone == fixed.lcb);
  CHECK(fixed.ucb_monotone == fixed.ucb);
}

TEST_CASE("gaps carry the running value") {
  const double nan = std::nan("");
  const auto c = manual({0.1, 0.2, 0.3}, {nan, 1.0, nan}, {nan, 2.0, 3.0});
  CHECK(std::isnan(c.lcb_monotone[0]));
  CHECK(c.lcb_monotone[1] == 1.0);
  CHECK(c.lcb_monotone[2] == 1.0);
  CHECK(c.ucb_monotone[2] == 3.0);
}

TEST_CASE("inversion returns the first containing grid point and its neighbours") {
  const auto c = manual({0.1, 0.2, 0.3, 0.4}, {1.0, 0.6, 0.1, -0.3}, {2.0, 2.2, 2.5, 3.0});
  const auto z = sens::invert(c, 0.0);
  REQUIRE(z.rho_hat);
  CHECK(*z.rho_hat == 0.4);
  CHECK(*z.previous == 0.3);
  CHECK_FALSE(z.next);
  const auto mid = sens::invert(c, 0.5);
  CHECK(*mid.rho_hat == 0.3);
  CHECK(*mid.next == 0.4);
  CHECK_FALSE(sens::invert(c, 10.0).rho_hat);
  // the intervals are nested, so a threshold further from the centre needs at least as much budget
  double prev = 0.0;
  for (double t : {1.5, 1.0, 0.6, 0.2, -0.2}) {
    const auto r = sens::invert(c, t);
    REQUIRE(r.rho_hat);
    CHECK(*r.rho_hat >= prev);
    prev = *r.rho_hat;
  }
}

TEST_CASE("curve on simulated data: grid validation, singleton grid and nesting") {
  auto dgp = sim::DgpConfig::paper();
  dgp.n = 1500;
  dgp.seed = 31;
  const auto data = sim::generate(dgp);
  est::EstimatorConfig cfg;
  cfg.regressor.trees = 40;
  const auto kl = Divergence::kl();
  CHECK_THROWS_AS(sens::compute_curve(data, kl, {}, effects::Effect::ATC, cfg), ConfigError);
  CHECK_THROWS_AS(sens::compute_curve(data, kl, {0.1, 0.1}, effects::Effect::ATC, cfg), ConfigError);
  CHECK_THROWS_AS(sens::compute_curve(data, kl, {0.2, 0.1}, effects::Effect::ATC, cfg), ConfigError);
  CHECK_THROWS_AS(sens::compute_curve(data, kl, {0.0, 0.1}, effects::Effect::ATC, cfg), ConfigError);

  sens::CurveConfig cc;
  cc.plan_seed = 5;
  const auto one = sens::compute_curve(data, kl, {0.3}, effects::Effect::ATC, cfg, cc);
  REQUIRE(one.size() == 1);
  const auto plan = est::split_folds(data, 5);
  const auto lo = est::estimate_bound(data, kl, 0.3, est::Target::Mu10Lower, cfg, plan);
  const auto hi = est::estimate_bound(data, kl, 0.3, est::Target::Mu10Upper, cfg, plan);
  const auto atc = effects::atc_bounds(lo, hi, data);
  const auto ci = effects::mean_interval(effects::summary(atc.first), effects::summary(atc.second), 0.95);
  CHECK(one.lcb[0] == ci.lo);
  CHECK(one.ucb[0] == ci.hi);

  const auto curve = sens::compute_curve(data, kl, {0.05, 0.25, 0.5, 1.0}, effects::Effect::ATE, cfg, cc);
  for (std::size_t k = 0; k < curve.size(); ++k) {
    CHECK(curve.ok[k]);
    CHECK(curve.lcb_monotone[k] <= curve.lcb[k]);
    CHECK(curve.ucb_monotone[k] >= curve.ucb[k]);
    if (k > 0) {
      CHECK(curve.lcb_monotone[k] <= curve.lcb_monotone[k - 1]);
      CHECK(curve.ucb_monotone[k] >= curve.ucb_monotone[k - 1]);
    }
  }
  cc.parallel = false;
  const auto serial = sens::compute_curve(data, kl, {0.05, 0.25, 0.5, 1.0}, effects::Effect::ATE, cfg, cc);
  CHECK(serial.lcb == curve.lcb);
  CHECK(serial.ucb == curve.ucb);
}
