#include "shapecox/partial_likelihood.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace shapecox {

namespace {

void check_predictor(const Dataset& ds, ConstVectorRef r) {
  if (r.size() != ds.size()) throw std::invalid_argument("linear predictor length does not match the dataset");
  if (!r.allFinite()) throw std::invalid_argument("linear predictor contains non-finite values");
}

}  // namespace

Eigen::VectorXd log_risk_sums(const Dataset& ds, ConstVectorRef r) {
  const Index n = ds.size();
  const auto order = ds.order();
  Eigen::VectorXd out(n);
  // Backward pass; the tail sum is stored relative to the running maximum so
  // that neither early large nor late small predictors overflow or vanish.
  double tail = 0.0;
  double top = -std::numeric_limits<double>::infinity();
  for (Index s = n - 1; s >= 0;) {
    const Index first = ds.tie_first(s);
    for (Index k = s; k >= first; --k) {
      const double v = r(order[static_cast<std::size_t>(k)]);
      if (v > top) {
        tail = tail * std::exp(top - v) + 1.0;
        top = v;
      } else {
        tail += std::exp(v - top);
      }
    }
    const double value = std::log(tail) + top;
    for (Index k = s; k >= first; --k) out(k) = value;
    s = first - 1;
  }
  return out;
}

RiskSetPass evaluate_risk_sets(const Dataset& ds, ConstVectorRef r) {
  check_predictor(ds, r);
  const Index n = ds.size();
  const auto order = ds.order();
  const auto& status = ds.status();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::VectorXd log_risk = log_risk_sums(ds, r);

  // h_i = sum over events j with Y_j <= Y_i of exp(r_i - log R_j). The sum
  // runs forward in time, where -log R_j only grows, so it is kept as
  // cum * exp(shift) with shift the latest -log R_j.
  RiskSetPass out;
  out.score.resize(n);
  out.weights.resize(n);
  double loglik = 0.0;
  double cum = 0.0;
  double shift = 0.0;
  for (Index s = 0; s < n;) {
    const Index last = ds.tie_last(s);
    for (Index k = s; k <= last; ++k) {
      const Index i = order[static_cast<std::size_t>(k)];
      if (!status(i)) continue;
      const double t = -log_risk(k);
      if (cum == 0.0) {
        cum = 1.0;
        shift = t;
      } else if (t > shift) {
        cum = cum * std::exp(shift - t) + 1.0;
        shift = t;
      } else {
        cum += std::exp(t - shift);
      }
      loglik += r(i) - log_risk(k);
    }
    for (Index k = s; k <= last; ++k) {
      const Index i = order[static_cast<std::size_t>(k)];
      const double h = cum == 0.0 ? 0.0 : cum * std::exp(r(i) + shift);
      out.score(i) = inv_n * (status(i) - h);
      out.weights(i) = std::max(inv_n * h, kWeightFloor);
    }
    s = last + 1;
  }
  out.loglik = inv_n * loglik;
  return out;
}

double log_partial_likelihood(const Dataset& ds, ConstVectorRef r) {
  check_predictor(ds, r);
  const auto order = ds.order();
  const Eigen::VectorXd log_risk = log_risk_sums(ds, r);
  double loglik = 0.0;
  for (Index k = 0; k < ds.size(); ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    if (ds.status()(i)) loglik += r(i) - log_risk(k);
  }
  return loglik / static_cast<double>(ds.size());
}

Eigen::VectorXd score_in_r(const Dataset& ds, ConstVectorRef r) { return evaluate_risk_sets(ds, r).score; }

Eigen::VectorXd curvature_weights(const Dataset& ds, ConstVectorRef r) { return evaluate_risk_sets(ds, r).weights; }

double s0n(const Dataset& ds, ConstVectorRef r, double y) {
  check_predictor(ds, r);
  double s = 0.0;
  for (Index i = 0; i < ds.size(); ++i)
    if (ds.time()(i) >= y) s += std::exp(r(i));
  return s / static_cast<double>(ds.size());
}

CoefficientDerivatives coefficient_derivatives(const Dataset& ds, const Eigen::MatrixXd& covariates,
                                               ConstVectorRef r) {
  check_predictor(ds, r);
  const Index n = ds.size();
  const Index k = covariates.cols();
  if (covariates.rows() != n) throw std::invalid_argument("covariate rows do not match the dataset");
  const auto order = ds.order();

  // Risk-set moments relative to the running maximum of r.
  double top = -std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(k, k);
  CoefficientDerivatives out;
  out.gradient = Eigen::VectorXd::Zero(k);
  out.hessian = Eigen::MatrixXd::Zero(k, k);
  double loglik = 0.0;
  for (Index s = n - 1; s >= 0;) {
    const Index first = ds.tie_first(s);
    for (Index q = s; q >= first; --q) {
      const Index i = order[static_cast<std::size_t>(q)];
      if (r(i) > top) {
        const double scale = std::exp(top - r(i));
        s0 *= scale;
        s1 *= scale;
        s2 *= scale;
        top = r(i);
      }
      const double a = std::exp(r(i) - top);
      const auto xi = covariates.row(i).transpose();
      s0 += a;
      s1.noalias() += a * xi;
      s2.selfadjointView<Eigen::Lower>().rankUpdate(xi, a);
    }
    const Eigen::VectorXd mean = s1 / s0;
    int events = 0;
    for (Index q = s; q >= first; --q) {
      const Index i = order[static_cast<std::size_t>(q)];
      if (!ds.status()(i)) continue;
      ++events;
      loglik += r(i) - top - std::log(s0);
      out.gradient.noalias() += covariates.row(i).transpose() - mean;
    }
    if (events > 0) {
      const Eigen::MatrixXd second = s2.selfadjointView<Eigen::Lower>();
      out.hessian.noalias() -= events * (second / s0 - mean * mean.transpose());
    }
    s = first - 1;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loglik = loglik * inv_n;
  out.gradient *= inv_n;
  out.hessian *= inv_n;
  return out;
}

}  // namespace shapecox
