#pragma once

#include <Eigen/Core>
#include <span>

#include "shapecox/smple_fit.hpp"
#include "shapecox/survival_core.hpp"

namespace shapecox {

// Reference to one covariate column of a Dataset.
struct CovariateColumn {
  enum class Block { Linear, Additive };
  Block block = Block::Linear;
  Index index = 0;
};

struct TcrFit {
  Eigen::VectorXd beta;
  double loglik = 0.0;
  int iters = 0;
  bool converged = false;
};

// Design matrix made of the selected columns, in the given order.
Eigen::MatrixXd select_columns(const Dataset& ds, std::span<const CovariateColumn> columns);

// Every linear column followed by every additive column.
std::vector<CovariateColumn> all_columns(const Dataset& ds);

// Ordinary Cox partial-likelihood estimator on the selected columns:
// Newton-Raphson with step halving, same risk-set convention as L_n.
TcrFit fit_tcr(const Dataset& ds, std::span<const CovariateColumn> columns, const FitOptions& opts = {});
TcrFit fit_tcr(const Dataset& ds, const Eigen::MatrixXd& covariates, const FitOptions& opts = {});

}  // namespace shapecox
