#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fsens::optim {

enum class Method { NelderMead, Newton };

struct OptimizerConfig {
  Method method = Method::Newton;
  int restarts = 5;
  int max_iterations = 4000;
  double f_tolerance = 1e-13;
  double x_tolerance = 1e-11;
  double gradient_tolerance = 1e-10;
  // Objective values below this abort the solve: the dual of a well-posed
  // sensitivity model is bounded below.
  double divergence_floor = -1e12;
  bool polish = true;
  std::uint64_t seed = 1;
};

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Derivative-free downhill simplex (adaptive coefficients of Gao and Han),
// restarted from the best vertex until the simplex stops improving.
Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                   const OptimizerConfig& cfg);

// Returns false when x is outside the objective's domain (value = +inf).
using SecondOrderObjective =
    std::function<bool(const Eigen::VectorXd& x, double& value, Eigen::VectorXd* grad, Eigen::MatrixXd* hess)>;

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

// Levenberg-damped Newton with Armijo backtracking and box projection.
// Variables pinned at a bound with an outward gradient are frozen for the step.
Result damped_newton(const SecondOrderObjective& f, const Eigen::VectorXd& x0, const Box& box,
                     const OptimizerConfig& cfg);

}  // namespace fsens::optim
