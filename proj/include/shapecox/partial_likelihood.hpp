#pragma once

#include <Eigen/Core>

#include "shapecox/survival_core.hpp"

namespace shapecox {

// Per-observation linear predictor x_i'beta + g(z_i).
using LinearPredictor = Eigen::VectorXd;
using ConstVectorRef = Eigen::Ref<const Eigen::VectorXd>;

inline constexpr double kWeightFloor = 1e-10;

// (1/n) sum_i delta_i [ r_i - log sum_{j: Y_j >= Y_i} exp(r_j) ].
double log_partial_likelihood(const Dataset& ds, ConstVectorRef r);

// d L_n / d r_i.
Eigen::VectorXd score_in_r(const Dataset& ds, ConstVectorRef r);

// (1/n) exp(r_i) sum_{j: Y_j <= Y_i} delta_j / (n S_0n(Y_j)), floored at
// kWeightFloor. Dominates the diagonal of -d^2 L_n / d r^2.
Eigen::VectorXd curvature_weights(const Dataset& ds, ConstVectorRef r);

// (1/n) sum_i 1(Y_i >= y) exp(r_i).
double s0n(const Dataset& ds, ConstVectorRef r, double y);

// log of sum_{j : Y_j >= Y_i} exp(r_j) for each sorted position of ds.order().
Eigen::VectorXd log_risk_sums(const Dataset& ds, ConstVectorRef r);

// Likelihood, score and curvature weights from one sorted pass.
struct RiskSetPass {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::VectorXd weights;
};
RiskSetPass evaluate_risk_sets(const Dataset& ds, ConstVectorRef r);

// Gradient and Hessian of L_n with respect to coefficients of `covariates`
// (n x k) at linear predictor r.
struct CoefficientDerivatives {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};
CoefficientDerivatives coefficient_derivatives(const Dataset& ds, const Eigen::MatrixXd& covariates,
                                               ConstVectorRef r);

}  // namespace shapecox
