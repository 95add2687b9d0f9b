#pragma once

#include <functional>
#include <span>
#include <vector>

namespace fsens::stats {

double normal_cdf(double x);

// Inverse standard normal CDF, Wichura's AS241 (PPND16) rational
// approximation; relative error about 1e-16 on (0, 1).
double normal_quantile(double p);

double mean(std::span<const double> v);
// Plug-in (divide-by-n) variance.
double variance(std::span<const double> v);
double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);
double iqr(std::span<const double> v);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive Gauss-Kronrod (15-point) on [a, b]; infinite limits allowed.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double tolerance = 1e-12);

// Nodes and weights for E[g(Z)], Z ~ N(0, 1): sum_k w_k g(z_k). Built by the
// Golub-Welsch eigenvalue method on the probabilists' Hermite recurrence.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermite& gauss_hermite(int order);

}  // namespace fsens::stats
