#include "shapecox/baselines.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "shapecox/errors.hpp"
#include "shapecox/partial_likelihood.hpp"

namespace shapecox {

Eigen::MatrixXd select_columns(const Dataset& ds, std::span<const CovariateColumn> columns) {
  Eigen::MatrixXd out(ds.size(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& c = columns[k];
    const Eigen::MatrixXd& src = c.block == CovariateColumn::Block::Linear ? ds.x() : ds.z();
    if (c.index < 0 || c.index >= src.cols()) throw std::invalid_argument("covariate column index out of range");
    out.col(static_cast<Index>(k)) = src.col(c.index);
  }
  return out;
}

std::vector<CovariateColumn> all_columns(const Dataset& ds) {
  std::vector<CovariateColumn> cols;
  for (Index k = 0; k < ds.num_linear(); ++k) cols.push_back({CovariateColumn::Block::Linear, k});
  for (Index k = 0; k < ds.num_additive(); ++k) cols.push_back({CovariateColumn::Block::Additive, k});
  return cols;
}

TcrFit fit_tcr(const Dataset& ds, std::span<const CovariateColumn> columns, const FitOptions& opts) {
  return fit_tcr(ds, select_columns(ds, columns), opts);
}

TcrFit fit_tcr(const Dataset& ds, const Eigen::MatrixXd& covariates, const FitOptions& opts) {
  const Index k = covariates.cols();
  if (k == 0) throw std::invalid_argument("fit_tcr: no covariates selected");
  if (covariates.rows() != ds.size()) throw std::invalid_argument("fit_tcr: covariate rows do not match the dataset");
  check_full_rank(ds, covariates);

  TcrFit fit;
  fit.beta = Eigen::VectorXd::Zero(k);
  if (opts.beta_init && opts.beta_init->size() == k) fit.beta = *opts.beta_init;
  Eigen::VectorXd r = covariates * fit.beta;
  auto der = coefficient_derivatives(ds, covariates, r);
  // Converged needs a small gradient and a small Newton step: under monotone
  // likelihood the gradient vanishes while the step stays of order one.
  auto small_gradient = [&] { return der.gradient.norm() <= 1e-8 * (1.0 + std::abs(der.loglik)); };
  for (int iter = 1; iter <= opts.max_outer_iters; ++iter) {
    fit.iters = iter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-der.hessian);
    // Full rank was checked up front, so a numerically singular information
    // matrix means the risk sets have degenerated along a diverging beta.
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
      if (iter > 1) throw FitError("fit_tcr: likelihood maximized at infinity (information matrix vanished)");
      throw SingularError("fit_tcr: singular information matrix");
    }
    const Eigen::VectorXd step = ldlt.solve(der.gradient);
    if (small_gradient() && step.norm() <= 1e-4 * (1.0 + fit.beta.norm())) {
      fit.converged = true;
      break;
    }
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd cand_beta = fit.beta + t * step;
      const Eigen::VectorXd cand_r = covariates * cand_beta;
      const double lc = log_partial_likelihood(ds, cand_r);
      if (std::isfinite(lc) && lc >= der.loglik) {
        fit.beta = cand_beta;
        r = cand_r;
        moved = true;
        break;
      }
    }
    if (fit.beta.norm() > 50.0) throw FitError("fit_tcr: likelihood maximized at infinity (monotone likelihood)");
    der = coefficient_derivatives(ds, covariates, r);
    if (!moved) {
      fit.converged = small_gradient();
      break;
    }
  }
  fit.loglik = der.loglik;
  if (!fit.converged) throw FitError("fit_tcr: no stationary point within the iteration budget");
  return fit;
}

}  // namespace shapecox
