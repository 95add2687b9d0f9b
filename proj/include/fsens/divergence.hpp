#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fsens {

enum class DivergenceKind { KL, ChiSquared, CressieRead };

// A convex generator f with f(1) = 0 together with its convex conjugate
// f*(s) = sup_{t >= 0} { s t - f(t) } and the first two derivatives of f*.
// Immutable; every member is a pure function.
class Divergence {
 public:
  static Divergence kl();
  static Divergence chi_squared();
  static Divergence cressie_read(double k);
  // Accepts "kl", "chi2"/"chi_squared", "cressie_read"/"cr" (case-insensitive).
  static Divergence from_name(std::string_view name, std::optional<double> k = std::nullopt);

  DivergenceKind kind() const { return kind_; }
  double k() const { return k_; }
  std::string name() const;

  // Generator; f(0) is the right limit, t < 0 is a domain error.
  double f(double t) const;
  // f'(t) and f''(t) for t > 0.
  double f_prime(double t) const;
  double f_second(double t) const;
  // Conjugate; total on the real line, +inf outside the effective domain.
  double conj(double s) const;
  // (f*)'(s), the maximizing t of s t - f(t).
  double conj_prime(double s) const;
  double conj_second(double s) const;

  // lim_{t -> 0+} f(t), possibly +inf.
  double f_at_zero() const;
  // sup of the effective domain of f* (+inf unless Cressie-Read with k < 1).
  double conj_domain_sup() const;
  // Points where f* is not twice differentiable.
  std::vector<double> conj_kinks() const;

 private:
  Divergence(DivergenceKind kind, double k) : kind_(kind), k_(k) {}

  DivergenceKind kind_;
  double k_;
};

// Remark-1 embedding of the uniform Gamma-selection model: any Gamma-bounded
// odds ratio satisfies the divergence constraint at max{f(1/Gamma), f(Gamma)}.
double gamma_to_rho(const Divergence& spec, double gamma);

// Callable view used by the validator so that deliberately broken triples can
// be certified as broken.
struct DivergenceFunctions {
  std::function<double(double)> f;
  std::function<double(double)> conj;
  std::function<double(double)> conj_prime;
  std::vector<double> kinks;
  double domain_sup = INFINITY;

  static DivergenceFunctions of(const Divergence& spec);
};

struct SamplingGrid {
  double s_min = -50.0;
  double s_max = 50.0;
  int s_points = 2001;
  double t_max = 50.0;
  int random_pairs = 5000;
  double fd_step = 1e-5;
  unsigned long long seed = 20240901ULL;
};

struct ValidationReport {
  double f_at_one = 0.0;
  double max_fenchel_violation = 0.0;
  double max_fenchel_equality_gap = 0.0;
  double max_convexity_violation = 0.0;
  double max_conj_mismatch = 0.0;
  double max_conj_monotonicity_violation = 0.0;
  double max_conj_convexity_violation = 0.0;
  double max_derivative_mismatch = 0.0;
  int s_points_checked = 0;
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
};

// Maximizes s t - f(t) over t >= 0 by a coarse log-grid scan followed by
// golden-section refinement; independent of any closed-form conjugate.
double numeric_conjugate(const std::function<double(double)>& f, double s);

// Numerically certifies the generator/conjugate invariants. Violations are
// reported (and listed in `issues` when they exceed their tolerance), never
// thrown. Errors on large conjugate values are measured relative to
// max(1, |f*(s)|).
ValidationReport validate_spec(const DivergenceFunctions& fns, const SamplingGrid& grid = {});
ValidationReport validate_spec(const Divergence& spec, const SamplingGrid& grid = {});

}  // namespace fsens
