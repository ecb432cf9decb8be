#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shapecox/survival_core.hpp"

namespace shapecox {

// Covariance of sqrt(n) (theta_hat - theta_0) estimated by data splitting.
struct SplitVariance {
  Eigen::MatrixXd sigma_hat;
  double alpha_tilde = 0.0;
  Index k_n = 0;  // number of blocks per partition, floor(n^alpha_tilde)
  Index m_n = 0;  // block size, floor(n / n^alpha_tilde)
  int repeats = 0;  // partitions that entered the average
  int dropped_repeats = 0;
  Index n = 0;
  std::vector<std::string> warnings;
};

struct SplitOptions {
  double alpha_tilde = 0.3;
  int repeats = 20;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Estimator applied to the rows of one block. Returning nullopt or throwing
// marks the block as failed. Must be safe to call concurrently when
// threads > 1.
using SubsampleEstimator = std::function<std::optional<Eigen::VectorXd>(std::span<const Index> rows)>;

// Block counts for a sample of size n.
std::pair<Index, Index> split_sizes(Index n, double alpha_tilde);

// Each repeat draws a uniform permutation from its own stream, cuts the first
// k_n * m_n items into k_n contiguous blocks, and forms
// (m_n / k_n) sum_i (theta_i - mean)(theta_i - mean)'. A failed block is
// redrawn once from the items outside the other blocks; a second failure
// drops the repeat. The result averages the surviving repeats.
SplitVariance split_variance(Index n, const SubsampleEstimator& estimator, const SplitOptions& opts);

// theta_k -/+ n^{-1/2} sqrt(sigma_kk) u_{(1+level)/2}.
std::pair<double, double> wald_interval(const Eigen::VectorXd& theta_hat, const SplitVariance& sv, double level,
                                        Index coordinate);

// n (theta_hat - theta0)' sigma^{-1} (theta_hat - theta0).
double chisq_region_stat(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0, const SplitVariance& sv);

struct ChisqTest {
  double statistic = 0.0;
  double critical = 0.0;
  bool reject = false;
};
// Rejects H0: theta = theta0 at level alpha when the statistic exceeds the
// (1 - alpha) chi-square quantile with dim(theta) degrees of freedom.
ChisqTest chisq_test(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0, const SplitVariance& sv,
                     double alpha);

// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
double chisq_cdf(double x, int dof);
double chisq_quantile(double q, int dof);
double normal_cdf(double x);
double normal_quantile(double q);

}  // namespace shapecox
