#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "fsens/divergence.hpp"
#include "fsens/nuisance.hpp"
#include "fsens/optim.hpp"
#include "fsens/sieve.hpp"

namespace fsens::est {

using Index = Eigen::Index;

struct Dataset {
  Eigen::MatrixXd X;  // n x d
  Eigen::VectorXi T;  // 0 / 1
  Eigen::VectorXd Y;

  Index n() const { return X.rows(); }
  int d() const { return static_cast<int>(X.cols()); }
  std::vector<Index> arm(int t) const;
  // Throws DataError on size mismatches, non-binary T, non-finite values or
  // an empty arm.
  void validate() const;
};

// mu10: bounds on E[Y(1) | T = 0]; mu01: bounds on E[Y(0) | T = 1].
enum class Target { Mu10Lower, Mu10Upper, Mu01Lower, Mu01Upper };
std::string target_name(Target t);
Target target_from_name(const std::string& name);
inline bool is_upper(Target t) { return t == Target::Mu10Upper || t == Target::Mu01Upper; }
// Arm whose outcomes are observed for the target (1 for mu10, 0 for mu01).
inline int source_arm(Target t) { return (t == Target::Mu10Lower || t == Target::Mu10Upper) ? 1 : 0; }

struct FoldPlan {
  std::array<std::vector<Index>, 3> treated;
  std::array<std::vector<Index>, 3> control;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;  // per dataset row

  const std::array<std::vector<Index>, 3>& arm(int t) const { return t == 1 ? treated : control; }
};

// Shuffles each arm with a seeded generator and deals it into three folds,
// the first (size mod 3) folds receiving one extra unit.
FoldPlan split_folds(const Dataset& data, std::uint64_t seed);

struct SieveSettings {
  sieve::BasisKind kind = sieve::BasisKind::Polynomial;
  int order = 4;              // spline order (cubic = 4)
  int J = -1;                 // < 0: select_Jn on the ERM fold size
  double smoothness = 4.0;    // p in the J_n schedule
  int interaction_order = 1;  // 0: full tensor product
};

struct EstimatorConfig {
  nuisance::RegressorSpec regressor;
  SieveSettings sieve;
  double eps = 1e-3;
  double clip = 0.01;
  std::uint64_t seed = 1;
  optim::OptimizerConfig opt;
  bool parallel = true;
};

struct OutcomeLaw {
  double mean = 0.0;
  double sd = 1.0;
};

// Test hooks replacing estimated pieces with known ones. All functions see
// covariate rows and the source/target orientation of the requested target.
struct EstimatorHooks {
  std::function<double(const double* x)> oracle_r;
  // Gaussian law of the source-arm outcome given x; h is then integrated exactly.
  std::function<OutcomeLaw(const double* x)> oracle_outcome;
  // Fixed (alpha, eta) for the lower bound of the sign-adjusted outcome
  // (Y for lower targets, -Y for upper ones); skips the ERM.
  std::function<std::pair<double, double>(const double* x, bool upper)> frozen_theta;
  bool h_zero = false;
  bool r_one = false;
};

struct FoldDiagnostics {
  int fold = 0;
  double erm_risk = 0.0;
  double constant_risk = 0.0;
  int floor_hits = 0;
  bool hit_coefficient_bound = false;
  double p1_hat = 0.0;  // source fraction of the propensity fold
  Index n_fit = 0, n_reg = 0, n_eval_source = 0, n_eval_target = 0;
  int sieve_terms = 0;
};

struct BoundEstimate {
  Target target = Target::Mu10Lower;
  double rho = 0.0;
  double point = 0.0;
  double sigma_hat = 0.0;
  Index n = 0;
  Eigen::VectorXd d1;               // source-arm components, aligned with source_rows
  Eigen::VectorXd d0;               // target-arm components, aligned with target_rows
  std::vector<Index> source_rows;
  std::vector<Index> target_rows;
  std::vector<int> fold_of;         // per dataset row
  std::array<double, 3> fold_values{};  // per-fold contributions; point is their mean
  double p_source = 0.0;            // |source arm| / n
  double p_target = 0.0;
  std::uint64_t plan_seed = 0;
  std::vector<FoldDiagnostics> diagnostics;
  std::vector<std::string> warnings;

  double standard_error() const { return sigma_hat / std::sqrt(static_cast<double>(n)); }
  double recompute_point() const;
  double recompute_sigma() const;
};

// Plug-in variance (1/p1) Var(d1) + (1/p0) Var(d0) with divide-by-size
// variances. Throws std::invalid_argument when either vector has fewer than
// two entries or a probability is not positive.
double variance_estimate(const Eigen::VectorXd& d1, const Eigen::VectorXd& d0, double p1_hat, double p0_hat);

// Propensity fits are shared across rho values and lower/upper targets; the
// cache stores r-hat on each evaluation fold keyed by (plan seed, source arm, fold).
class NuisanceCache {
 public:
  bool lookup(std::uint64_t plan_seed, int source, int fold, Eigen::VectorXd& r, double& p1) const;
  void store(std::uint64_t plan_seed, int source, int fold, const Eigen::VectorXd& r, double p1);

 private:
  mutable std::mutex mutex_;
  std::map<std::tuple<std::uint64_t, int, int>, std::pair<Eigen::VectorXd, double>> entries_;
};

BoundEstimate estimate_bound(const Dataset& data, const Divergence& spec, double rho, Target target,
                             const EstimatorConfig& cfg, const FoldPlan& plan, const EstimatorHooks& hooks = {},
                             NuisanceCache* cache = nullptr);
BoundEstimate estimate_bound(const Dataset& data, const Divergence& spec, double rho, Target target,
                             const EstimatorConfig& cfg);

struct OracleFunctions {
  std::function<double(const double* x)> r;
  std::function<double(const double* x, double y)> H;
  std::function<double(const double* x)> h;
};

// phi_i = (S_i / p_s) r(X_i) [H(X_i, Y_i) - h(X_i)] + ((1 - S_i) / p_t) h(X_i),
// S_i = 1 on the target's source arm. Throws std::invalid_argument when an
// arm is empty.
Eigen::VectorXd oracle_influence(const Dataset& data, const OracleFunctions& oracle, Target target);

}  // namespace fsens::est
