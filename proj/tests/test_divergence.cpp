#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fsens/divergence.hpp"
#include "fsens/errors.hpp"

using fsens::Divergence;

namespace {

std::vector<Divergence> shipped() {
  return {Divergence::kl(), Divergence::chi_squared(), Divergence::cressie_read(-1.0),
          Divergence::cressie_read(2.0), Divergence::cressie_read(3.0), Divergence::cressie_read(0.5)};
}

}  // namespace

TEST_CASE("closed forms at hand-evaluated points") {
  const auto kl = Divergence::kl();
  CHECK(kl.f(1.0) == 0.0);
  CHECK(kl.conj(0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

  const auto chi2 = Divergence::chi_squared();
  CHECK(chi2.f(2.0) == 1.0);
  CHECK(chi2.conj(2.0) == doctest::Approx(3.0).epsilon(1e-15));
  // Continuous at the kink: f*(s) = -1 for s <= -2 (t = 0 is optimal).
  CHECK(chi2.conj(-2.0) == -1.0);
  CHECK(chi2.conj(-7.5) == -1.0);
  CHECK(chi2.conj_prime(2.0) == 2.0);

  const auto cr2 = Divergence::cressie_read(2.0);
  CHECK(cr2.f(3.0) == doctest::Approx(2.0).epsilon(1e-15));

  for (const auto& d : shipped()) CHECK(d.f(1.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("construction errors") {
  CHECK_THROWS_AS(Divergence::from_name("tv"), fsens::ConfigError);
  CHECK_THROWS_AS(Divergence::cressie_read(0.0), fsens::ConfigError);
  CHECK_THROWS_AS(Divergence::cressie_read(1.0), fsens::ConfigError);
  CHECK_THROWS_AS(Divergence::from_name("cressie_read"), fsens::ConfigError);
  CHECK(Divergence::from_name("KL").kind() == fsens::DivergenceKind::KL);
  CHECK(Divergence::from_name("chi2").kind() == fsens::DivergenceKind::ChiSquared);
  CHECK(Divergence::from_name("cr", 3.0).k() == 3.0);
  CHECK_THROWS_AS(Divergence::kl().f(-0.5), std::domain_error);
}

TEST_CASE("validate_spec certifies shipped divergences") {
  for (const auto& d : shipped()) {
    CAPTURE(d.name());
    CAPTURE(d.k());
    const auto rep = fsens::validate_spec(d);
    CHECK(rep.ok());
    CHECK(rep.max_conj_mismatch < 1e-6);
    CHECK(rep.max_derivative_mismatch < 1e-5);
    CHECK(rep.s_points_checked > 100);
  }
}

TEST_CASE("validate_spec flags a generator with f(1) != 0") {
  auto fns = fsens::DivergenceFunctions::of(Divergence::kl());
  auto base = fns.f;
  fns.f = [base](double t) { return base(t) + 0.1; };
  const auto rep = fsens::validate_spec(fns);
  CHECK_FALSE(rep.ok());
  CHECK(rep.f_at_one == doctest::Approx(0.1));
}

TEST_CASE("validate_spec rejects the (y+2)^2/4 - 1/4 chi-square conjugate") {
  auto fns = fsens::DivergenceFunctions::of(Divergence::chi_squared());
  fns.conj = [](double s) {
    const double p = std::max(s + 2.0, 0.0);
    return 0.25 * (p * p - 1.0);
  };
  const auto rep = fsens::validate_spec(fns);
  CHECK_FALSE(rep.ok());
  CHECK(rep.max_conj_mismatch > 0.5);
}

TEST_CASE("conjugate matches a fine t-grid supremum on [-50, 50]") {
  for (const auto& d : shipped()) {
    CAPTURE(d.name());
    CAPTURE(d.k());
    double worst = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double s = -50.0 + 0.25 * i;
      if (s > d.conj_domain_sup() - 1e-2) break;
      const double num = fsens::numeric_conjugate([&](double t) { return d.f(t); }, s);
      worst = std::max(worst, std::fabs(d.conj(s) - num) / std::max(1.0, std::fabs(num)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("f_at_zero agrees with the right limit") {
  for (const auto& d : shipped()) {
    CAPTURE(d.k());
    if (std::isinf(d.f_at_zero())) {
      CHECK(d.f(1e-14) > 1e6);
    } else {
      CHECK(std::fabs(d.f_at_zero() - d.f(1e-30)) < 1e-8);
    }
  }
  CHECK(Divergence::kl().f_at_zero() == 0.0);
  CHECK(Divergence::chi_squared().f_at_zero() == 1.0);
  CHECK(Divergence::cressie_read(3.0).f_at_zero() == doctest::Approx(1.0 / 3.0));
  CHECK(std::isinf(Divergence::cressie_read(-1.0).f_at_zero()));
}

TEST_CASE("gamma_to_rho") {
  CHECK(fsens::gamma_to_rho(Divergence::kl(), 1.0) == 0.0);
  CHECK(fsens::gamma_to_rho(Divergence::kl(), 2.0) == doctest::Approx(2.0 * std::numbers::ln2));
  CHECK(fsens::gamma_to_rho(Divergence::chi_squared(), 3.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(fsens::gamma_to_rho(Divergence::kl(), 0.9), fsens::ConfigError);
  for (const auto& d : shipped()) {
    double prev = 0.0;
    for (double g = 1.0; g <= 20.0; g += 0.25) {
      const double r = fsens::gamma_to_rho(d, g);
      CHECK(r >= prev);
      prev = r;
    }
  }
}
