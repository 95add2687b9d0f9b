#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>

namespace fsens::nuisance {

enum class RegressorKind { RandomForest, KernelSmoother, KNearest };

struct RegressorSpec {
  RegressorKind kind = RegressorKind::RandomForest;
  // forest
  int trees = 200;
  int min_leaf = 5;
  int max_depth = 0;  // 0: unlimited
  int mtry = 0;       // 0: all features
  // A split must reduce the node's weighted SSE by more than
  // split_penalty * (node variance); 0 gives plain CART.
  double split_penalty = 30.0;
  // kernel smoother (Gaussian, on covariates in their native scale)
  double bandwidth = 0.1;
  // k-nearest neighbours; 0 picks ceil(n^(4 / (4 + d)))
  int k = 0;

  void validate() const;  // throws ConfigError
  static RegressorKind kind_from_name(const std::string& name);
  static std::string kind_name(RegressorKind kind);
};

class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual double predict(const double* x) const = 0;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

std::unique_ptr<Regressor> fit_regressor(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         std::uint64_t seed);

// Propensity e(x) = P(T = 1 | x) by regressing T on X, clipped to [clip, 1 - clip].
class Propensity {
 public:
  Propensity(std::shared_ptr<const Regressor> reg, double clip) : reg_(std::move(reg)), clip_(clip) {}
  double operator()(const double* x) const;
  double clip() const { return clip_; }

 private:
  std::shared_ptr<const Regressor> reg_;
  double clip_;
};

// Throws DataError when either arm is missing from `t`.
Propensity fit_propensity(const Eigen::MatrixXd& X, const Eigen::VectorXi& t, const RegressorSpec& spec,
                          std::uint64_t seed, double clip = 0.01);

// r(x) = (1 - e) p1 / (e (1 - p1)).
double shift_ratio(double e, double p1);

// ((1 - clip) / clip) max(p1 / (1 - p1), (1 - p1) / p1): bounds shift_ratio
// for either arm orientation once e is clipped.
double shift_ratio_bound(double clip, double p1);

std::unique_ptr<Regressor> fit_h(const Eigen::MatrixXd& X, const Eigen::VectorXd& H, const RegressorSpec& spec,
                                 std::uint64_t seed);

}  // namespace fsens::nuisance
