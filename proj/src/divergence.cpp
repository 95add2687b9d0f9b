#include "fsens/divergence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fsens/errors.hpp"
#include "fsens/rng.hpp"

namespace fsens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

Divergence Divergence::kl() { return {DivergenceKind::KL, 1.0}; }

Divergence Divergence::chi_squared() { return {DivergenceKind::ChiSquared, 2.0}; }

Divergence Divergence::cressie_read(double k) {
  if (!std::isfinite(k) || k == 0.0 || k == 1.0)
    throw ConfigError("Cressie-Read parameter k must be finite and not in {0, 1}");
  return {DivergenceKind::CressieRead, k};
}

Divergence Divergence::from_name(std::string_view name, std::optional<double> k) {
  const std::string n = lower(name);
  if (n == "kl") return kl();
  if (n == "chi2" || n == "chi_squared" || n == "chisquared") return chi_squared();
  if (n == "cressie_read" || n == "cr" || n == "cressieread") {
    if (!k) throw ConfigError("Cressie-Read divergence requires k");
    return cressie_read(*k);
  }
  throw ConfigError("unknown divergence '" + std::string(name) + "' (valid: kl, chi2, cressie_read)");
}

std::string Divergence::name() const {
  switch (kind_) {
    case DivergenceKind::KL: return "kl";
    case DivergenceKind::ChiSquared: return "chi2";
    case DivergenceKind::CressieRead: return "cressie_read";
  }
  return "";
}

double Divergence::f(double t) const {
  if (t < 0.0 || std::isnan(t)) throw std::domain_error("divergence generator evaluated at t < 0");
  switch (kind_) {
    case DivergenceKind::KL:
      return t == 0.0 ? 0.0 : t * std::log(t);
    case DivergenceKind::ChiSquared:
      return (t - 1.0) * (t - 1.0);
    case DivergenceKind::CressieRead:
      if (t == 0.0) return f_at_zero();
      return (std::pow(t, k_) - k_ * t + k_ - 1.0) / (k_ * (k_ - 1.0));
  }
  return kInf;
}

double Divergence::f_prime(double t) const {
  switch (kind_) {
    case DivergenceKind::KL: return std::log(t) + 1.0;
    case DivergenceKind::ChiSquared: return 2.0 * (t - 1.0);
    case DivergenceKind::CressieRead: return (std::pow(t, k_ - 1.0) - 1.0) / (k_ - 1.0);
  }
  return kInf;
}

double Divergence::f_second(double t) const {
  switch (kind_) {
    case DivergenceKind::KL: return 1.0 / t;
    case DivergenceKind::ChiSquared: return 2.0;
    case DivergenceKind::CressieRead: return std::pow(t, k_ - 2.0);
  }
  return kInf;
}

double Divergence::f_at_zero() const {
  switch (kind_) {
    case DivergenceKind::KL: return 0.0;
    case DivergenceKind::ChiSquared: return 1.0;
    case DivergenceKind::CressieRead: return k_ > 0.0 ? 1.0 / k_ : kInf;
  }
  return kInf;
}

double Divergence::conj_domain_sup() const {
  if (kind_ == DivergenceKind::CressieRead && k_ < 1.0) return 1.0 / (1.0 - k_);
  return kInf;
}

std::vector<double> Divergence::conj_kinks() const {
  switch (kind_) {
    case DivergenceKind::KL: return {};
    case DivergenceKind::ChiSquared: return {-2.0};
    case DivergenceKind::CressieRead:
      if (k_ > 1.0) return {-1.0 / (k_ - 1.0)};
      return {};
  }
  return {};
}

double Divergence::conj(double s) const {
  switch (kind_) {
    case DivergenceKind::KL:
      return std::exp(s - 1.0);
    case DivergenceKind::ChiSquared: {
      const double p = std::max(s + 2.0, 0.0);
      return 0.25 * p * p - 1.0;
    }
    case DivergenceKind::CressieRead: {
      const double base = 1.0 + (k_ - 1.0) * s;
      if (base <= 0.0) return k_ > 1.0 ? -1.0 / k_ : kInf;
      return (std::pow(base, k_ / (k_ - 1.0)) - 1.0) / k_;
    }
  }
  return kInf;
}

double Divergence::conj_prime(double s) const {
  switch (kind_) {
    case DivergenceKind::KL:
      return std::exp(s - 1.0);
    case DivergenceKind::ChiSquared:
      return std::max(0.5 * s + 1.0, 0.0);
    case DivergenceKind::CressieRead: {
      const double base = 1.0 + (k_ - 1.0) * s;
      if (base <= 0.0) return k_ > 1.0 ? 0.0 : kInf;
      return std::pow(base, 1.0 / (k_ - 1.0));
    }
  }
  return kInf;
}

double Divergence::conj_second(double s) const {
  switch (kind_) {
    case DivergenceKind::KL:
      return std::exp(s - 1.0);
    case DivergenceKind::ChiSquared:
      return s > -2.0 ? 0.5 : 0.0;
    case DivergenceKind::CressieRead: {
      const double base = 1.0 + (k_ - 1.0) * s;
      if (base <= 0.0) return k_ > 1.0 ? 0.0 : kInf;
      return std::pow(base, (2.0 - k_) / (k_ - 1.0));
    }
  }
  return kInf;
}

double gamma_to_rho(const Divergence& spec, double gamma) {
  if (!(gamma >= 1.0)) throw ConfigError("gamma_to_rho requires gamma >= 1");
  return std::max(spec.f(1.0 / gamma), spec.f(gamma));
}

DivergenceFunctions DivergenceFunctions::of(const Divergence& spec) {
  DivergenceFunctions fns;
  fns.f = [spec](double t) { return spec.f(t); };
  fns.conj = [spec](double s) { return spec.conj(s); };
  fns.conj_prime = [spec](double s) { return spec.conj_prime(s); };
  fns.kinks = spec.conj_kinks();
  fns.domain_sup = spec.conj_domain_sup();
  return fns;
}

double numeric_conjugate(const std::function<double(double)>& f, double s) {
  // s t - f(t) is concave in t, hence unimodal in u = log t.
  auto g = [&](double u) {
    const double t = std::exp(u);
    const double v = s * t - f(t);
    return std::isnan(v) ? -kInf : v;
  };
  constexpr double u_lo = -60.0, u_hi = 80.0;
  constexpr int coarse = 1401;
  double best_u = u_lo, best = -kInf;
  for (int i = 0; i < coarse; ++i) {
    const double u = u_lo + (u_hi - u_lo) * i / (coarse - 1);
    const double v = g(u);
    if (v > best) {
      best = v;
      best_u = u;
    }
  }
  const double step = (u_hi - u_lo) / (coarse - 1);
  double a = best_u - step, b = best_u + step;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double gc = g(c), gd = g(d);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::fabs(a)); ++it) {
    if (gc > gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - invphi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + invphi * (b - a);
      gd = g(d);
    }
  }
  best = std::max({best, gc, gd});
  const double at_zero = -f(0.0);
  return std::max(best, at_zero);
}

ValidationReport validate_spec(const DivergenceFunctions& fns, const SamplingGrid& grid) {
  ValidationReport rep;
  rep.f_at_one = fns.f(1.0);
  if (rep.f_at_one != 0.0) rep.issues.push_back("f(1) != 0 (f(1) = " + std::to_string(rep.f_at_one) + ")");

  auto scale = [](double v) { return std::max(1.0, std::fabs(v)); };

  // Conjugate against the numeric supremum, monotonicity and convexity of f*.
  const double s_hi = std::min(grid.s_max, fns.domain_sup - 1e-2);
  std::vector<double> s_grid, conj_vals;
  for (int i = 0; i < grid.s_points; ++i) {
    const double s = grid.s_min + (grid.s_max - grid.s_min) * i / std::max(1, grid.s_points - 1);
    if (s > s_hi) break;
    s_grid.push_back(s);
    conj_vals.push_back(fns.conj(s));
  }
  rep.s_points_checked = static_cast<int>(s_grid.size());
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    const double numeric = numeric_conjugate(fns.f, s_grid[i]);
    rep.max_conj_mismatch = std::max(rep.max_conj_mismatch, std::fabs(conj_vals[i] - numeric) / scale(numeric));
    if (i > 0)
      rep.max_conj_monotonicity_violation =
          std::max(rep.max_conj_monotonicity_violation, (conj_vals[i - 1] - conj_vals[i]) / scale(conj_vals[i]));
    if (i > 0 && i + 1 < s_grid.size()) {
      const double mid = conj_vals[i];
      const double chord = 0.5 * (conj_vals[i - 1] + conj_vals[i + 1]);
      rep.max_conj_convexity_violation = std::max(rep.max_conj_convexity_violation, (mid - chord) / scale(mid));
    }
    // Derivative against central differences away from kinks and the domain edge.
    const double h = grid.fd_step * std::max(1.0, std::fabs(s_grid[i]));
    bool smooth = s_grid[i] + 2 * h < fns.domain_sup;
    for (double kink : fns.kinks) smooth = smooth && std::fabs(s_grid[i] - kink) > 4 * h;
    if (smooth) {
      const double fd = (fns.conj(s_grid[i] + h) - fns.conj(s_grid[i] - h)) / (2 * h);
      const double an = fns.conj_prime(s_grid[i]);
      rep.max_derivative_mismatch = std::max(rep.max_derivative_mismatch, std::fabs(fd - an) / scale(an));
    }
    // Fenchel-Young equality at the maximizer t = (f*)'(s).
    const double t_star = fns.conj_prime(s_grid[i]);
    if (std::isfinite(t_star)) {
      const double gap = std::fabs(s_grid[i] * t_star - fns.f(t_star) - conj_vals[i]);
      rep.max_fenchel_equality_gap = std::max(rep.max_fenchel_equality_gap, gap / scale(conj_vals[i]));
    }
  }

  // Fenchel-Young inequality and convexity of f on random draws.
  rng::Philox gen(grid.seed);
  for (int i = 0; i < grid.random_pairs; ++i) {
    const double s = grid.s_min + (std::min(grid.s_max, s_hi) - grid.s_min) * gen.uniform();
    const double t = grid.t_max * gen.uniform();
    const double lhs = s * t;
    const double rhs = fns.f(t) + fns.conj(s);
    rep.max_fenchel_violation = std::max(rep.max_fenchel_violation, (lhs - rhs) / scale(rhs));

    const double t1 = grid.t_max * gen.uniform();
    const double t2 = grid.t_max * gen.uniform();
    const double lam = gen.uniform();
    const double f_mix = fns.f(lam * t1 + (1 - lam) * t2);
    const double chord = lam * fns.f(t1) + (1 - lam) * fns.f(t2);
    rep.max_convexity_violation = std::max(rep.max_convexity_violation, (f_mix - chord) / scale(chord));
  }

  if (rep.max_conj_mismatch > 1e-6) rep.issues.push_back("conjugate differs from numeric supremum");
  if (rep.max_fenchel_violation > 1e-10) rep.issues.push_back("Fenchel-Young inequality violated");
  if (rep.max_fenchel_equality_gap > 1e-6) rep.issues.push_back("Fenchel-Young equality fails at (f*)'(s)");
  if (rep.max_convexity_violation > 1e-10) rep.issues.push_back("generator is not convex");
  if (rep.max_conj_monotonicity_violation > 1e-12) rep.issues.push_back("conjugate is not nondecreasing");
  if (rep.max_conj_convexity_violation > 1e-10) rep.issues.push_back("conjugate is not convex");
  if (rep.max_derivative_mismatch > 1e-5) rep.issues.push_back("conjugate derivative disagrees with finite differences");
  return rep;
}

ValidationReport validate_spec(const Divergence& spec, const SamplingGrid& grid) {
  return validate_spec(DivergenceFunctions::of(spec), grid);
}

}  // namespace fsens
