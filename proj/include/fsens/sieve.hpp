#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fsens/divergence.hpp"
#include "fsens/optim.hpp"

namespace fsens::sieve {

enum class BasisKind { Polynomial, Spline };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Tensor-product basis over a box. Each coordinate is mapped to t in [0, 1];
// the univariate family is {t^k : k <= J} (polynomial) or the truncated-power
// spline {t^k : k < r} u {(t - kappa_j)_+^(r-1)} with J equispaced interior
// knots. Terms are multi-indices into the univariate families; the constant
// term is always index 0. interaction_order limits how many coordinates a
// term may involve (0 keeps the full tensor product).
class SieveBasis {
 public:
  BasisKind kind() const { return kind_; }
  int order() const { return order_; }
  int J() const { return J_; }
  int dim() const { return dim_; }
  int interaction_order() const { return interaction_order_; }
  int per_dim_size() const { return per_dim_; }
  int n_terms() const { return static_cast<int>(terms_.size()); }
  const std::vector<Interval>& domain() const { return domain_; }
  const std::vector<std::vector<double>>& knots() const { return knots_; }
  const std::vector<std::vector<int>>& terms() const { return terms_; }
  double mesh_ratio() const;

  // Evaluates all basis functions at x (length dim); returns true when any
  // coordinate had to be clamped into the domain.
  bool evaluate(const double* x, double* out) const;
  Eigen::MatrixXd design(const Eigen::MatrixXd& X) const;
  std::string describe() const;

 private:
  friend SieveBasis build_basis(BasisKind, int, int, int, const std::vector<Interval>&, int, double);
  void univariate(int j, double t, double* out) const;

  BasisKind kind_ = BasisKind::Polynomial;
  int order_ = 1;
  int J_ = 0;
  int dim_ = 1;
  int interaction_order_ = 0;
  int per_dim_ = 1;
  std::vector<Interval> domain_;
  std::vector<std::vector<double>> knots_;
  std::vector<std::vector<int>> terms_;
};

// order is the spline order r (cubic = 4) and is ignored for polynomials,
// whose degree is J. Throws ConfigError on empty/inverted domains, order < 1,
// J < 0, d < 1, or a knot mesh ratio above max_mesh_ratio.
SieveBasis build_basis(BasisKind kind, int order, int J, int d, const std::vector<Interval>& domain,
                       int interaction_order = 0, double max_mesh_ratio = 4.0);

// ceil((n / log n)^(1 / (2p + d))).
int select_Jn(long n, double p, int d);

struct PairValue {
  double alpha = 0.0;
  double eta = 0.0;
  bool clamped = false;        // x was outside the basis domain
  bool range_clamped = false;  // alpha or eta was held to its fitted range
};

struct SieveFunctionPair {
  SieveBasis basis;
  Eigen::VectorXd coeffs_alpha;
  Eigen::VectorXd coeffs_eta;
  double eps = 1e-3;
  // Ranges of the fitted functions over the fitting sample. Evaluation holds
  // both functions inside them, so a polynomial that dips between or beyond
  // training points cannot push alpha toward the floor.
  double alpha_min = 0.0;
  double alpha_max = std::numeric_limits<double>::infinity();
  double eta_min = -std::numeric_limits<double>::infinity();
  double eta_max = std::numeric_limits<double>::infinity();

  // alpha = max(eps, phi(x) . a), eta = phi(x) . b, each held to its range.
  PairValue evaluate(const double* x) const;
  PairValue evaluate(const Eigen::VectorXd& x) const { return evaluate(x.data()); }
};

struct ErmConfig {
  double eps = 1e-3;
  double coefficient_bound = 1e3;
  optim::OptimizerConfig opt;
  bool parallel = true;
};

struct ErmDiagnostics {
  double risk = 0.0;
  double constant_risk = 0.0;    // best constants-only risk on the same fold
  double restart_spread = 0.0;   // best-to-worst risk gap across restarts
  int floor_hits = 0;            // fold points where alpha is at eps
  bool hit_coefficient_bound = false;
  int iterations = 0;
  double scale = 1.0;            // outcome standardization used internally
  double center = 0.0;
};

struct ErmFit {
  SieveFunctionPair pair;
  ErmDiagnostics diagnostics;
};

// Minimizes (1/n) sum_i loss(alpha(x_i), eta(x_i), y_i) over the coefficients.
ErmFit fit_erm(const SieveBasis& basis, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Divergence& spec,
               double rho, const ErmConfig& cfg);

// Empirical risk of a pair on a sample.
double empirical_risk(const SieveFunctionPair& pair, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Divergence& spec, double rho);

}  // namespace fsens::sieve
