#include "shapecox/smple_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <stdexcept>

#include "shapecox/errors.hpp"

namespace shapecox {

std::string check_full_rank(const Dataset& ds, const Eigen::MatrixXd& covariates) {
  const Index k = covariates.cols();
  if (k == 0) return {};
  Eigen::MatrixXd ev(ds.num_events(), k);
  Index row = 0;
  for (Index i = 0; i < ds.size(); ++i)
    if (ds.status()(i)) ev.row(row++) = covariates.row(i);
  ev.rowwise() -= ev.colwise().mean();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ev / scale);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Index c = qr.rank(); c < k; ++c) {
      if (!cols.empty()) cols += ", ";
      cols += std::to_string(perm(c));
    }
    throw SingularError("covariates are rank deficient on event rows; dependent column(s): " + cols);
  }
  const auto diag = qr.matrixQR().diagonal().cwiseAbs();
  if (diag.minCoeff() < 1e-7 * diag.maxCoeff()) return "covariates are nearly collinear on event rows";
  return {};
}

FittedModel fit_smple(const Dataset& ds, std::span<const Shape> shapes, const FitOptions& opts) {
  const Index n = ds.size();
  const Index d = ds.num_linear();
  const Index p = ds.num_additive();
  if (static_cast<Index>(shapes.size()) != p)
    throw std::invalid_argument("fit_smple: need one shape per additive covariate");
  if (d == 0 && p == 0) throw std::invalid_argument("fit_smple: nothing to fit (no covariates)");
  if (n < 2) throw ValidationError("fit_smple: at least two observations required");
  if (!(opts.tol_loglik > 0.0) || opts.max_outer_iters < 1)
    throw std::invalid_argument("fit_smple: invalid options");

  FittedModel fit;
  if (auto w = check_full_rank(ds, ds.x()); !w.empty()) fit.warnings.push_back(w);

  fit.beta = Eigen::VectorXd::Zero(d);
  if (opts.beta_init) {
    if (opts.beta_init->size() != d) throw std::invalid_argument("fit_smple: beta_init has wrong length");
    fit.beta = *opts.beta_init;
  }

  std::vector<ShapeProjector> projectors;
  std::vector<Eigen::VectorXd> g;  // component values at knots
  std::vector<char> degenerate(static_cast<std::size_t>(p), 0);
  projectors.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    Eigen::VectorXd col = ds.z().col(j);
    if (!has_curvature(shapes[static_cast<std::size_t>(j)])) {
      // A monotone component is unbounded below on covariate values beyond
      // the event range (those rows only enter risk-set denominators), so it
      // is fitted on the event range and extended as a constant.
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (Index i = 0; i < n; ++i)
        if (ds.status()(i)) {
          lo = std::min(lo, col(i));
          hi = std::max(hi, col(i));
        }
      col = col.cwiseMax(lo).cwiseMin(hi);
    }
    projectors.emplace_back(std::span<const double>(col.data(), static_cast<std::size_t>(n)), shapes[static_cast<std::size_t>(j)]);
    g.push_back(Eigen::VectorXd::Zero(static_cast<Index>(projectors.back().knots().size())));
    if (projectors.back().knots().size() == 1) {
      degenerate[static_cast<std::size_t>(j)] = 1;
      fit.warnings.push_back("additive covariate " + std::to_string(j) + " is constant on the event rows; component fixed at 0");
    }
  }
  auto expand = [&](Index j, const Eigen::VectorXd& values) {
    const auto& of = projectors[static_cast<std::size_t>(j)].knot_of();
    Eigen::VectorXd out(n);
    for (Index i = 0; i < n; ++i) out(i) = values(of[static_cast<std::size_t>(i)]);
    return out;
  };

  Eigen::VectorXd r = ds.x() * fit.beta;
  double loglik = log_partial_likelihood(ds, r);
  if (!std::isfinite(loglik)) throw FitError("fit_smple: non-finite initial likelihood");
  fit.loglik_trace.push_back(loglik);

  double event_count = static_cast<double>(ds.num_events());
  const Eigen::VectorXd delta = ds.status().cast<double>();

  // Accepts r + t * step for the largest t = 2^-h that does not lower L_n.
  auto halve = [&](const Eigen::VectorXd& step, double& t_out) {
    double t = 1.0;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd cand = r + t * step;
      const double lc = log_partial_likelihood(ds, cand);
      if (std::isfinite(lc) && lc >= loglik) {
        r = cand;
        loglik = lc;
        t_out = t;
        return true;
      }
    }
    t_out = 0.0;
    return false;
  };

  for (int iter = 1; iter <= opts.max_outer_iters; ++iter) {
    const double previous = loglik;

    if (d > 0) {
      const auto der = coefficient_derivatives(ds, ds.x(), r);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-der.hessian);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        throw SingularError("fit_smple: singular Hessian in beta");
      const Eigen::VectorXd step = ldlt.solve(der.gradient);
      double t = 0.0;
      if (step.allFinite() && halve(ds.x() * step, t)) fit.beta += t * step;
    }

    for (Index j = 0; j < p; ++j) {
      if (degenerate[static_cast<std::size_t>(j)]) continue;
      const auto pass = evaluate_risk_sets(ds, r);
      const Eigen::VectorXd current = expand(j, g[static_cast<std::size_t>(j)]);
      const Eigen::VectorXd working = current + pass.score.cwiseQuotient(pass.weights);
      auto& proj = projectors[static_cast<std::size_t>(j)];
      const std::vector<double> target = proj.project(
          std::span<const double>(working.data(), static_cast<std::size_t>(n)),
          std::span<const double>(pass.weights.data(), static_cast<std::size_t>(n)));
      const Eigen::VectorXd change =
          Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Index>(target.size())) - g[static_cast<std::size_t>(j)];
      double t = 0.0;
      if (halve(expand(j, change), t)) g[static_cast<std::size_t>(j)] += t * change;
    }

    for (Index j = 0; j < p; ++j) {
      const Eigen::VectorXd at_data = expand(j, g[static_cast<std::size_t>(j)]);
      const double c = delta.dot(at_data) / event_count;
      g[static_cast<std::size_t>(j)].array() -= c;
      r.array() -= c;
    }
    loglik = log_partial_likelihood(ds, r);
    if (!std::isfinite(loglik)) throw FitError("fit_smple: non-finite likelihood at an accepted step");
    if (loglik < previous - 1e-12 * (1.0 + std::abs(previous)))
      throw FitError("fit_smple: partial likelihood decreased between iterations");
    fit.loglik_trace.push_back(loglik);
    fit.iters = iter;
    if (opts.verbose) std::fprintf(stderr, "iter %d  loglik %.12g\n", iter, loglik);
    if (std::abs(loglik - previous) <= opts.tol_loglik * (1.0 + std::abs(previous))) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    fit.warnings.push_back("iteration budget exhausted before the relative likelihood change fell below tolerance");

  // Rebuild r from the parameters so r_hat, loglik and the components agree.
  r = ds.x() * fit.beta;
  fit.components.reserve(static_cast<std::size_t>(p));
  fit.centering_residuals.resize(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    const Eigen::VectorXd at_data = expand(j, g[static_cast<std::size_t>(j)]);
    r += at_data;
    fit.centering_residuals[static_cast<std::size_t>(j)] = delta.dot(at_data) / event_count;
    AdditiveComponent c;
    c.knots = projectors[static_cast<std::size_t>(j)].knots();
    c.values.assign(g[static_cast<std::size_t>(j)].data(), g[static_cast<std::size_t>(j)].data() + g[static_cast<std::size_t>(j)].size());
    c.shape = shapes[static_cast<std::size_t>(j)];
    fit.components.push_back(std::move(c));
  }
  fit.r_hat = r;
  fit.loglik = log_partial_likelihood(ds, r);
  return fit;
}

double predict_r(const FittedModel& m, std::span<const double> x, std::span<const double> z) {
  if (static_cast<Index>(x.size()) != m.beta.size() || z.size() != m.components.size())
    throw std::invalid_argument("predict_r: covariate dimensions do not match the model");
  double r = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) r += x[k] * m.beta(static_cast<Index>(k));
  for (std::size_t j = 0; j < z.size(); ++j) r += eval_component(m.components[j], z[j]);
  return r;
}

}  // namespace shapecox
