#include "fsens/kernels.hpp"

#include <cmath>
#include <vector>

namespace fsens::kernels {

namespace {

struct RowTerms {
  double value, ga, ge, haa, hab, hbb;
  bool floor, finite;
};

inline RowTerms row_terms(const Divergence& spec, double rho, double eps, double alpha_lin, double eta, double y,
                          bool derivatives) {
  RowTerms r{};
  r.floor = alpha_lin < eps;
  const double alpha = r.floor ? eps : alpha_lin;
  const double s = (y + eta) / (-alpha);
  const double c = spec.conj(s);
  r.finite = std::isfinite(c);
  if (!r.finite) return r;
  r.value = alpha * c + eta + alpha * rho;
  if (derivatives) {
    const double cp = spec.conj_prime(s);
    const double w = spec.conj_second(s) / alpha;
    r.ge = 1.0 - cp;
    r.hbb = w;
    if (!r.floor) {
      r.ga = c - s * cp + rho;
      r.haa = w * s * s;
      r.hab = w * s;
    }
  }
  return r;
}

void init(RiskEval& out, Eigen::Index p, bool derivatives) {
  if (derivatives) {
    out.grad = Eigen::VectorXd::Zero(2 * p);
    out.hess = Eigen::MatrixXd::Zero(2 * p, 2 * p);
  }
}

RiskEval chunk_risk(const Divergence& spec, double rho, double eps, const Eigen::MatrixXd& phi,
                    const Eigen::VectorXd& y, const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool derivatives,
                    Eigen::Index start, Eigen::Index len) {
  const Eigen::Index p = phi.cols();
  RiskEval out;
  init(out, p, derivatives);
  const auto rows = phi.middleRows(start, len);
  const Eigen::VectorXd alpha_lin = rows * a;
  const Eigen::VectorXd eta = rows * b;
  Eigen::VectorXd ga(len), ge(len), haa(len), hab(len), hbb(len);
  for (Eigen::Index i = 0; i < len; ++i) {
    const auto t = row_terms(spec, rho, eps, alpha_lin(i), eta(i), y(start + i), derivatives);
    if (!t.finite) {
      out.finite = false;
      return out;
    }
    out.value += t.value;
    out.floor_hits += t.floor ? 1 : 0;
    ga(i) = t.ga;
    ge(i) = t.ge;
    haa(i) = t.haa;
    hab(i) = t.hab;
    hbb(i) = t.hbb;
  }
  if (derivatives) {
    out.grad.head(p) = rows.transpose() * ga;
    out.grad.tail(p) = rows.transpose() * ge;
    out.hess.topLeftCorner(p, p) = rows.transpose() * haa.asDiagonal() * rows;
    out.hess.topRightCorner(p, p) = rows.transpose() * hab.asDiagonal() * rows;
    out.hess.bottomRightCorner(p, p) = rows.transpose() * hbb.asDiagonal() * rows;
  }
  return out;
}

void finish(RiskEval& out, Eigen::Index p, Eigen::Index n, bool derivatives) {
  const double inv = 1.0 / static_cast<double>(n);
  out.value *= inv;
  if (derivatives) {
    out.grad *= inv;
    out.hess *= inv;
    out.hess.bottomLeftCorner(p, p) = out.hess.topRightCorner(p, p).transpose();
  }
}

}  // namespace

RiskEval erm_risk(const Divergence& spec, double rho, double eps, const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool derivatives, Exec exec) {
  const Eigen::Index n = phi.rows();
  const Eigen::Index p = phi.cols();
  RiskEval out;
  init(out, p, derivatives);

  if (exec == Exec::Serial) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = phi.row(i);
      const auto t = row_terms(spec, rho, eps, row.dot(a), row.dot(b), y(i), derivatives);
      if (!t.finite) {
        out.finite = false;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      out.value += t.value;
      out.floor_hits += t.floor ? 1 : 0;
      if (derivatives) {
        out.grad.head(p) += t.ga * row.transpose();
        out.grad.tail(p) += t.ge * row.transpose();
        const Eigen::MatrixXd outer = row.transpose() * row;
        out.hess.topLeftCorner(p, p) += t.haa * outer;
        out.hess.topRightCorner(p, p) += t.hab * outer;
        out.hess.bottomRightCorner(p, p) += t.hbb * outer;
      }
    }
    finish(out, p, n, derivatives);
    return out;
  }

  const Eigen::Index chunks = (n + kChunkRows - 1) / kChunkRows;
  std::vector<RiskEval> parts(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index start = c * kChunkRows;
    parts[static_cast<std::size_t>(c)] =
        chunk_risk(spec, rho, eps, phi, y, a, b, derivatives, start, std::min(kChunkRows, n - start));
  }
  for (const auto& part : parts) {
    if (!part.finite) {
      out.finite = false;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    out.value += part.value;
    out.floor_hits += part.floor_hits;
    if (derivatives) {
      out.grad += part.grad;
      out.hess += part.hess;
    }
  }
  finish(out, p, n, derivatives);
  return out;
}

double weighted_sum(const Eigen::VectorXd& w, const Eigen::VectorXd& v, Exec exec) {
  const Eigen::Index n = w.size();
  if (exec == Exec::Serial) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += w(i) * v(i);
    return s;
  }
  const Eigen::Index chunks = (n + kChunkRows - 1) / kChunkRows;
  std::vector<double> parts(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index start = c * kChunkRows;
    const Eigen::Index len = std::min(kChunkRows, n - start);
    parts[static_cast<std::size_t>(c)] = w.segment(start, len).dot(v.segment(start, len));
  }
  double s = 0.0;
  for (double x : parts) s += x;
  return s;
}

}  // namespace fsens::kernels
