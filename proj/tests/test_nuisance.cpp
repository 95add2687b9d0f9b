#include <doctest.h>

#include <cmath>

#include "fsens/errors.hpp"
#include "fsens/nuisance.hpp"
#include "fsens/rng.hpp"
#include "fsens/stats.hpp"

using namespace fsens;
using namespace fsens::nuisance;

namespace {

Eigen::MatrixXd uniform_matrix(rng::Philox& gen, int n, int d) {
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = gen.uniform();
  return X;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("shift ratio values") {
  CHECK(shift_ratio(0.3, 0.3) == doctest::Approx(1.0));
  CHECK(shift_ratio(0.8, 0.5) == doctest::Approx(0.25));
  CHECK(shift_ratio(0.5, 0.8) == doctest::Approx(4.0));
  for (double p1 : {0.2, 0.5, 0.7})
    for (double e : {0.01, 0.3, 0.99}) CHECK(shift_ratio(e, p1) <= shift_ratio_bound(0.01, p1));
}

TEST_CASE("regressor spec validation") {
  RegressorSpec spec;
  spec.trees = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.bandwidth = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK(RegressorSpec::kind_from_name("knn") == RegressorKind::KNearest);
  CHECK_THROWS_AS(RegressorSpec::kind_from_name("svm"), ConfigError);
}

TEST_CASE("propensity with independent treatment is flat") {
  rng::Philox gen(21);
  const int n = 5000;
  const Eigen::MatrixXd X = uniform_matrix(gen, n, 4);
  Eigen::VectorXi t(n);
  for (int i = 0; i < n; ++i) t(i) = gen.uniform() < 0.5;
  auto e = fit_propensity(X, t, {}, 1);
  const Eigen::MatrixXd test = uniform_matrix(gen, 500, 4);
  double sup = 0.0;
  for (int i = 0; i < test.rows(); ++i) {
    const Eigen::VectorXd x = test.row(i);
    sup = std::max(sup, std::fabs(e(x.data()) - 0.5));
  }
  CHECK(sup < 0.05);
}

TEST_CASE("propensity recovers a logistic score") {
  rng::Philox gen(22);
  const int n = 5000;
  const Eigen::Vector4d gamma(-0.531, 0.126, -0.312, 0.018);
  const Eigen::MatrixXd X = uniform_matrix(gen, n, 4);
  Eigen::VectorXi t(n);
  for (int i = 0; i < n; ++i) t(i) = gen.uniform() < sigmoid(X.row(i).dot(gamma));
  auto e = fit_propensity(X, t, {}, 2);
  double mse = 0.0;
  const Eigen::MatrixXd test = uniform_matrix(gen, 1000, 4);
  for (int i = 0; i < test.rows(); ++i) {
    const Eigen::VectorXd x = test.row(i);
    const double diff = e(x.data()) - sigmoid(x.dot(gamma));
    mse += diff * diff / test.rows();
  }
  CHECK(mse < 0.01);
}

TEST_CASE("propensity clipping and single-arm guard") {
  rng::Philox gen(23);
  const Eigen::MatrixXd X = uniform_matrix(gen, 200, 2);
  Eigen::VectorXi t = Eigen::VectorXi::Ones(200);
  CHECK_THROWS_AS(fit_propensity(X, t, {}, 1), DataError);
  for (int i = 0; i < 200; ++i) t(i) = X(i, 0) > 0.5;
  auto e = fit_propensity(X, t, {}, 1, 0.01);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = X.row(i);
    CHECK(e(x.data()) >= 0.01);
    CHECK(e(x.data()) <= 0.99);
  }
}

TEST_CASE("forest regression of h") {
  rng::Philox gen(24);
  const int n = 5000;
  const Eigen::MatrixXd X = uniform_matrix(gen, n, 4);
  RegressorSpec leaf1;
  leaf1.min_leaf = 1;
  auto constant = fit_h(X, Eigen::VectorXd::Constant(n, 2.5), leaf1, 3);
  const Eigen::VectorXd pc = constant->predict(X);
  CHECK((pc.array() - 2.5).abs().maxCoeff() < 1e-6);

  auto linear = fit_h(X, X.col(0), {}, 4);
  const Eigen::MatrixXd test = uniform_matrix(gen, 1000, 4);
  const double mse = (linear->predict(test) - test.col(0)).squaredNorm() / test.rows();
  CHECK(mse < 1e-3);

  Eigen::VectorXd noise(n);
  for (int i = 0; i < n; ++i) noise(i) = gen.normal();
  auto flat = fit_h(X, noise, {}, 5);
  const double m = noise.mean();
  const double se = std::sqrt(stats::variance(std::vector<double>(noise.data(), noise.data() + n)) / n);
  const double sup = (flat->predict(test).array() - m).abs().maxCoeff();
  CHECK(sup < 3.0 * se);

  // plain CART (no split penalty) interpolates noise instead
  RegressorSpec plain;
  plain.split_penalty = 0.0;
  auto noisy = fit_h(X, noise, plain, 5);
  CHECK((noisy->predict(test).array() - m).abs().maxCoeff() > 3.0 * se);
}

TEST_CASE("alternative regressors") {
  rng::Philox gen(25);
  const int n = 2000;
  const Eigen::MatrixXd X = uniform_matrix(gen, n, 2);
  Eigen::VectorXd y = X.col(0) * 2.0 + X.col(1);
  const Eigen::MatrixXd test = uniform_matrix(gen, 200, 2);
  const Eigen::VectorXd truth = test.col(0) * 2.0 + test.col(1);
  RegressorSpec knn;
  knn.kind = RegressorKind::KNearest;
  RegressorSpec kern;
  kern.kind = RegressorKind::KernelSmoother;
  kern.bandwidth = 0.05;
  for (const auto& spec : {knn, kern}) {
    auto reg = fit_regressor(spec, X, y, 1);
    const double mse = (reg->predict(test) - truth).squaredNorm() / test.rows();
    CHECK(mse < 0.01);
  }
}

TEST_CASE("forest is deterministic given the seed") {
  rng::Philox gen(26);
  const Eigen::MatrixXd X = uniform_matrix(gen, 500, 3);
  Eigen::VectorXd y(500);
  for (int i = 0; i < 500; ++i) y(i) = gen.normal() + X(i, 1);
  auto a = fit_h(X, y, {}, 9)->predict(X);
  auto b = fit_h(X, y, {}, 9)->predict(X);
  auto c = fit_h(X, y, {}, 10)->predict(X);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("change of measure at the true propensity") {
  rng::Philox gen(27);
  const int n = 200000;
  const Eigen::Vector4d gamma(-0.531, 0.126, -0.312, 0.018);
  std::vector<double> phi_t[3], phi_c[3];
  std::vector<Eigen::Vector4d> xs(n);
  std::vector<int> ts(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) xs[i](j) = gen.uniform();
    ts[i] = gen.uniform() < sigmoid(xs[i].dot(gamma));
  }
  // population P(T = 1) from an independent, much larger draw
  double p1 = 0.0;
  const int big = 2000000;
  for (int i = 0; i < big; ++i) {
    Eigen::Vector4d x;
    for (int j = 0; j < 4; ++j) x(j) = gen.uniform();
    p1 += sigmoid(x.dot(gamma)) / big;
  }
  for (int i = 0; i < n; ++i) {
    const double x1 = xs[i](0);
    const double fs[3] = {1.0, x1, x1 * x1};
    const double r = shift_ratio(sigmoid(xs[i].dot(gamma)), p1);
    for (int k = 0; k < 3; ++k) (ts[i] ? phi_t[k] : phi_c[k]).push_back(ts[i] ? r * fs[k] : fs[k]);
  }
  for (int k = 0; k < 3; ++k) {
    const double diff = stats::mean(phi_t[k]) - stats::mean(phi_c[k]);
    const double se = std::sqrt(stats::variance(phi_t[k]) / phi_t[k].size() + stats::variance(phi_c[k]) / phi_c[k].size());
    CHECK(std::fabs(diff) < 3.0 * se);
  }
}
