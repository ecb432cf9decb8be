#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapecox/partial_likelihood.hpp"
#include "shapecox/shape_solvers.hpp"
#include "shapecox/survival_core.hpp"

namespace shapecox {

struct FitOptions {
  double tol_loglik = 1e-8;  // relative change of L_n between outer iterations
  int max_outer_iters = 200;
  int max_halvings = 30;
  std::optional<Eigen::VectorXd> beta_init;
  bool verbose = false;
};

struct FittedModel {
  Eigen::VectorXd beta;
  std::vector<AdditiveComponent> components;
  LinearPredictor r_hat;
  double loglik = 0.0;
  int iters = 0;
  bool converged = false;
  // Event-weighted empirical mean of each fitted component at its data.
  std::vector<double> centering_residuals;
  // L_n after every outer iteration, starting with the initial value.
  std::vector<double> loglik_trace;
  std::vector<std::string> warnings;
};

// Shape-restricted maximum partial likelihood by cyclic backfitting:
// a Newton step in beta, then for each component a weighted shape projection
// of the working response g_j + u / w, each accepted through step halving so
// L_n never decreases, then event-weighted recentering of every component.
// Monotone components are fitted on covariate values clamped to the range
// seen on event rows and extend as constants beyond it.
FittedModel fit_smple(const Dataset& ds, std::span<const Shape> shapes, const FitOptions& opts = {});

// x'beta + sum_j g_j(z_j).
double predict_r(const FittedModel& m, std::span<const double> x, std::span<const double> z);

// Throws SingularError naming the offending columns when the centered
// covariates restricted to event rows are rank deficient. Returns a warning
// string (empty if none) when they are nearly singular.
std::string check_full_rank(const Dataset& ds, const Eigen::MatrixXd& covariates);

}  // namespace shapecox
