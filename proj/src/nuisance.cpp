#include "fsens/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fsens/errors.hpp"
#include "fsens/rng.hpp"

namespace fsens::nuisance {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

// CART regression forest on bootstrap count weights. Each node keeps its
// samples as a contiguous range in one presorted index array per feature;
// splitting stably partitions every array, so no node ever re-sorts.
class Forest final : public Regressor {
 public:
  Forest(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed)
      : d_(static_cast<int>(X.cols())) {
    trees_.resize(static_cast<std::size_t>(spec.trees));
    const int n = static_cast<int>(X.rows());
    std::vector<std::vector<int>> sorted(static_cast<std::size_t>(d_));
    for (int f = 0; f < d_; ++f) {
      auto& s = sorted[static_cast<std::size_t>(f)];
      s.resize(static_cast<std::size_t>(n));
      std::iota(s.begin(), s.end(), 0);
      std::stable_sort(s.begin(), s.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < spec.trees; ++t) {
      trees_[static_cast<std::size_t>(t)] = grow(spec, X, y, sorted, rng::derive_seed(seed, {0x74726565ULL, static_cast<std::uint64_t>(t)}));
    }
  }

  double predict(const double* x) const override {
    double total = 0.0;
    for (const auto& tree : trees_) {
      int node = 0;
      while (tree[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = tree[static_cast<std::size_t>(node)];
        node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
      }
      total += tree[static_cast<std::size_t>(node)].value;
    }
    return total / static_cast<double>(trees_.size());
  }

 private:
  std::vector<Node> grow(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const std::vector<std::vector<int>>& sorted, std::uint64_t seed) const {
    const int n = static_cast<int>(X.rows());
    rng::Philox gen(seed);
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) w[gen.below(static_cast<std::uint64_t>(n))] += 1.0;

    // Per-feature presorted arrays restricted to in-bag samples.
    std::vector<std::vector<int>> order(static_cast<std::size_t>(d_));
    for (int f = 0; f < d_; ++f)
      for (int i : sorted[static_cast<std::size_t>(f)])
        if (w[static_cast<std::size_t>(i)] > 0.0) order[static_cast<std::size_t>(f)].push_back(i);
    const int m = static_cast<int>(order[0].size());
    std::vector<int> scratch(static_cast<std::size_t>(m));
    std::vector<char> goes_left(static_cast<std::size_t>(n), 0);
    std::vector<int> features(static_cast<std::size_t>(d_));
    std::iota(features.begin(), features.end(), 0);
    const int mtry = spec.mtry > 0 ? std::min(spec.mtry, d_) : d_;

    std::vector<Node> nodes;
    struct Task {
      int node, lo, hi, depth;
    };
    std::vector<Task> stack;
    nodes.emplace_back();
    stack.push_back({0, 0, m, 0});
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();
      const auto& base = order[0];
      double W = 0.0, S = 0.0, Q = 0.0;
      double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
      for (int p = task.lo; p < task.hi; ++p) {
        const int i = base[static_cast<std::size_t>(p)];
        W += w[static_cast<std::size_t>(i)];
        S += w[static_cast<std::size_t>(i)] * y(i);
        Q += w[static_cast<std::size_t>(i)] * y(i) * y(i);
        ymin = std::min(ymin, y(i));
        ymax = std::max(ymax, y(i));
      }
      nodes[static_cast<std::size_t>(task.node)].value = S / W;
      const bool depth_ok = spec.max_depth == 0 || task.depth < spec.max_depth;
      if (!depth_ok || W < 2.0 * spec.min_leaf || ymin == ymax) continue;

      for (int k = 0; k < mtry; ++k)
        std::swap(features[static_cast<std::size_t>(k)],
                  features[static_cast<std::size_t>(k + static_cast<int>(gen.below(static_cast<std::uint64_t>(d_ - k))))]);
      const double parent = S * S / W;
      const double node_var = std::max(0.0, Q / W - (S / W) * (S / W));
      double best_gain = std::max(1e-12 * std::max(1.0, std::fabs(parent)), spec.split_penalty * node_var);
      int best_f = -1;
      double best_thr = 0.0;
      for (int k = 0; k < mtry; ++k) {
        const int f = features[static_cast<std::size_t>(k)];
        const auto& ord = order[static_cast<std::size_t>(f)];
        double wl = 0.0, sl = 0.0;
        for (int p = task.lo; p < task.hi - 1; ++p) {
          const int i = ord[static_cast<std::size_t>(p)];
          wl += w[static_cast<std::size_t>(i)];
          sl += w[static_cast<std::size_t>(i)] * y(i);
          const double xv = X(i, f), xn = X(ord[static_cast<std::size_t>(p + 1)], f);
          if (xv == xn || wl < spec.min_leaf || W - wl < spec.min_leaf) continue;
          const double sr = S - sl;
          const double gain = sl * sl / wl + sr * sr / (W - wl) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = f;
            best_thr = 0.5 * (xv + xn);
            if (best_thr == xn) best_thr = xv;
          }
        }
      }
      if (best_f < 0) continue;

      const auto& split_ord = order[static_cast<std::size_t>(best_f)];
      int mid = task.lo;
      for (int p = task.lo; p < task.hi; ++p) {
        const int i = split_ord[static_cast<std::size_t>(p)];
        const bool left = X(i, best_f) <= best_thr;
        goes_left[static_cast<std::size_t>(i)] = left;
        mid += left;
      }
      for (auto& ord : order) {
        int l = task.lo, r = mid;
        for (int p = task.lo; p < task.hi; ++p) {
          const int i = ord[static_cast<std::size_t>(p)];
          scratch[static_cast<std::size_t>(goes_left[static_cast<std::size_t>(i)] ? l++ : r++)] = i;
        }
        std::copy(scratch.begin() + task.lo, scratch.begin() + task.hi, ord.begin() + task.lo);
      }
      const int left_id = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      auto& nd = nodes[static_cast<std::size_t>(task.node)];
      nd.feature = best_f;
      nd.threshold = best_thr;
      nd.left = left_id;
      nd.right = left_id + 1;
      stack.push_back({left_id + 1, mid, task.hi, task.depth + 1});
      stack.push_back({left_id, task.lo, mid, task.depth + 1});
    }
    return nodes;
  }

  int d_;
  std::vector<std::vector<Node>> trees_;
};

class NearestNeighbours final : public Regressor {
 public:
  NearestNeighbours(int k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) : X_(X), y_(y) {
    const double n = static_cast<double>(X.rows());
    k_ = k > 0 ? k : static_cast<int>(std::ceil(std::pow(n, 4.0 / (4.0 + static_cast<double>(X.cols())))));
    k_ = std::clamp(k_, 1, static_cast<int>(X.rows()));
  }

  double predict(const double* x) const override {
    const auto n = X_.rows();
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < X_.cols(); ++j) s += (X_(i, j) - x[j]) * (X_(i, j) - x[j]);
      dist[static_cast<std::size_t>(i)] = {s, i};
    }
    std::nth_element(dist.begin(), dist.begin() + (k_ - 1), dist.end());
    double total = 0.0;
    for (int i = 0; i < k_; ++i) total += y_(dist[static_cast<std::size_t>(i)].second);
    return total / k_;
  }

 private:
  RowMatrix X_;
  Eigen::VectorXd y_;
  int k_;
};

class KernelSmoother final : public Regressor {
 public:
  KernelSmoother(double bandwidth, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) : X_(X), y_(y), h_(bandwidth) {}

  double predict(const double* x) const override {
    double num = 0.0, den = 0.0, best = std::numeric_limits<double>::infinity(), nearest = 0.0;
    for (Eigen::Index i = 0; i < X_.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < X_.cols(); ++j) s += (X_(i, j) - x[j]) * (X_(i, j) - x[j]);
      const double k = std::exp(-0.5 * s / (h_ * h_));
      num += k * y_(i);
      den += k;
      if (s < best) {
        best = s;
        nearest = y_(i);
      }
    }
    return den > 0.0 ? num / den : nearest;
  }

 private:
  RowMatrix X_;
  Eigen::VectorXd y_;
  double h_;
};

}  // namespace

void RegressorSpec::validate() const {
  if (trees < 1) throw ConfigError("regressor: trees must be at least 1");
  if (min_leaf < 1) throw ConfigError("regressor: min_leaf must be at least 1");
  if (max_depth < 0) throw ConfigError("regressor: max_depth must be nonnegative");
  if (mtry < 0) throw ConfigError("regressor: mtry must be nonnegative");
  if (!(split_penalty >= 0.0) || !std::isfinite(split_penalty)) throw ConfigError("regressor: split_penalty must be nonnegative");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("regressor: bandwidth must be positive");
  if (k < 0) throw ConfigError("regressor: k must be nonnegative");
}

RegressorKind RegressorSpec::kind_from_name(const std::string& name) {
  if (name == "random_forest" || name == "forest") return RegressorKind::RandomForest;
  if (name == "kernel" || name == "kernel_smoother") return RegressorKind::KernelSmoother;
  if (name == "knn" || name == "k_nearest") return RegressorKind::KNearest;
  throw ConfigError("unknown regressor '" + name + "' (expected random_forest, kernel_smoother or knn)");
}

std::string RegressorSpec::kind_name(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::RandomForest: return "random_forest";
    case RegressorKind::KernelSmoother: return "kernel_smoother";
    case RegressorKind::KNearest: return "knn";
  }
  return "?";
}

Eigen::VectorXd Regressor::predict(const Eigen::MatrixXd& X) const {
  const RowMatrix Xr = X;
  Eigen::VectorXd out(X.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(Xr.row(i).data());
  return out;
}

std::unique_ptr<Regressor> fit_regressor(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         std::uint64_t seed) {
  spec.validate();
  if (X.rows() == 0 || X.rows() != y.size()) throw DataError("regressor: empty training set or size mismatch");
  switch (spec.kind) {
    case RegressorKind::RandomForest: return std::make_unique<Forest>(spec, X, y, seed);
    case RegressorKind::KNearest: return std::make_unique<NearestNeighbours>(spec.k, X, y);
    case RegressorKind::KernelSmoother: return std::make_unique<KernelSmoother>(spec.bandwidth, X, y);
  }
  throw ConfigError("regressor: unknown kind");
}

double Propensity::operator()(const double* x) const { return std::clamp(reg_->predict(x), clip_, 1.0 - clip_); }

Propensity fit_propensity(const Eigen::MatrixXd& X, const Eigen::VectorXi& t, const RegressorSpec& spec,
                          std::uint64_t seed, double clip) {
  if (!(clip > 0.0 && clip < 0.5)) throw ConfigError("propensity clip must lie in (0, 0.5)");
  const auto treated = (t.array() == 1).count();
  if (treated == 0 || treated == t.size()) throw DataError("propensity: both treatment arms must be present");
  std::shared_ptr<const Regressor> reg = fit_regressor(spec, X, t.cast<double>(), seed);
  return Propensity(std::move(reg), clip);
}

double shift_ratio(double e, double p1) { return (1.0 - e) * p1 / (e * (1.0 - p1)); }

double shift_ratio_bound(double clip, double p1) {
  return (1.0 - clip) / clip * std::max(p1 / (1.0 - p1), (1.0 - p1) / p1);
}

std::unique_ptr<Regressor> fit_h(const Eigen::MatrixXd& X, const Eigen::VectorXd& H, const RegressorSpec& spec,
                                 std::uint64_t seed) {
  return fit_regressor(spec, X, H, seed);
}

}  // namespace fsens::nuisance
