#include "shapecox/variance_inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "shapecox/errors.hpp"
#include "shapecox/parallel.hpp"
#include "shapecox/rng.hpp"

namespace shapecox {

namespace {

std::optional<Eigen::VectorXd> try_estimate(const SubsampleEstimator& est, std::span<const Index> rows) {
  try {
    auto v = est(rows);
    if (v && !v->allFinite()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct RepeatResult {
  bool ok = false;
  Eigen::MatrixXd sigma;
  int redraws = 0;
};

double gamma_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int k = 1; k < 10000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a, x) by modified Lentz continued fraction.
double gamma_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

template <typename Cdf>
double bisect_quantile(Cdf cdf, double q, double lo, double hi) {
  while (cdf(hi) < q) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) < q)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::pair<Index, Index> split_sizes(Index n, double alpha_tilde) {
  const double k = std::pow(static_cast<double>(n), alpha_tilde);
  const auto blocks = static_cast<Index>(std::floor(k + 1e-9));
  const auto size = static_cast<Index>(std::floor(static_cast<double>(n) / k + 1e-9));
  return {blocks, size};
}

SplitVariance split_variance(Index n, const SubsampleEstimator& estimator, const SplitOptions& opts) {
  if (!(opts.alpha_tilde > 0.0 && opts.alpha_tilde < 1.0))
    throw std::invalid_argument("split_variance: alpha_tilde must lie in (0, 1)");
  if (opts.repeats < 1) throw std::invalid_argument("split_variance: repeats must be >= 1");
  const auto [k, m] = split_sizes(n, opts.alpha_tilde);
  if (k < 2) throw std::invalid_argument("split_variance: fewer than two blocks; increase n or alpha_tilde");
  if (m < 2) throw std::invalid_argument("split_variance: blocks of fewer than two observations; decrease alpha_tilde");

  std::vector<RepeatResult> results(static_cast<std::size_t>(opts.repeats));
  parallel_for(results.size(), opts.threads, [&, k = k, m = m](std::size_t rep) {
    Rng rng = Rng::stream(opts.seed, rep);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(std::span<Index>(perm));
    const auto used = static_cast<std::size_t>(k * m);

    std::vector<Eigen::VectorXd> thetas;
    thetas.reserve(static_cast<std::size_t>(k));
    RepeatResult& out = results[rep];
    for (Index b = 0; b < k; ++b) {
      const auto begin = static_cast<std::size_t>(b * m);
      std::span<const Index> rows(perm.data() + begin, static_cast<std::size_t>(m));
      auto theta = try_estimate(estimator, rows);
      if (!theta) {
        // Replacement block: m items drawn from this block plus the leftovers.
        std::vector<Index> pool(rows.begin(), rows.end());
        pool.insert(pool.end(), perm.begin() + static_cast<std::ptrdiff_t>(used), perm.end());
        rng.shuffle(std::span<Index>(pool));
        pool.resize(static_cast<std::size_t>(m));
        ++out.redraws;
        theta = try_estimate(estimator, pool);
        if (!theta) return;
      }
      if (!thetas.empty() && theta->size() != thetas.front().size())
        throw std::runtime_error("split_variance: estimator returned vectors of different lengths");
      thetas.push_back(std::move(*theta));
    }
    const Index d = thetas.front().size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& t : thetas) mean += t;
    mean /= static_cast<double>(k);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
    for (const auto& t : thetas) s.selfadjointView<Eigen::Lower>().rankUpdate(t - mean);
    out.sigma = s.selfadjointView<Eigen::Lower>();
    out.sigma *= static_cast<double>(m) / static_cast<double>(k);
    out.ok = true;
  });

  SplitVariance sv;
  sv.alpha_tilde = opts.alpha_tilde;
  sv.k_n = k;
  sv.m_n = m;
  sv.n = n;
  int redraws = 0;
  for (const auto& r : results) {
    redraws += r.redraws;
    if (!r.ok) {
      ++sv.dropped_repeats;
      continue;
    }
    if (sv.repeats == 0)
      sv.sigma_hat = r.sigma;
    else
      sv.sigma_hat += r.sigma;
    ++sv.repeats;
  }
  if (sv.repeats == 0) throw FitError("split_variance: the estimator failed in every repeat");
  sv.sigma_hat /= static_cast<double>(sv.repeats);
  if (m < sv.sigma_hat.rows() + 1)
    sv.warnings.push_back("block size is smaller than dim(theta) + 1; the estimate may be unreliable");
  if (redraws > 0) sv.warnings.push_back(std::to_string(redraws) + " block(s) redrawn after estimator failure");
  if (sv.dropped_repeats > 0) sv.warnings.push_back(std::to_string(sv.dropped_repeats) + " repeat(s) dropped");
  return sv;
}

std::pair<double, double> wald_interval(const Eigen::VectorXd& theta_hat, const SplitVariance& sv, double level,
                                        Index coordinate) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("wald_interval: level must lie in (0, 1)");
  if (coordinate < 0 || coordinate >= theta_hat.size() || coordinate >= sv.sigma_hat.rows())
    throw std::invalid_argument("wald_interval: coordinate out of range");
  const double var = sv.sigma_hat(coordinate, coordinate);
  if (!std::isfinite(var) || var < 0.0) throw std::invalid_argument("wald_interval: invalid variance entry");
  const double half = std::sqrt(var / static_cast<double>(sv.n)) * normal_quantile(0.5 * (1.0 + level));
  return {theta_hat(coordinate) - half, theta_hat(coordinate) + half};
}

double chisq_region_stat(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0, const SplitVariance& sv) {
  const Index d = theta_hat.size();
  if (theta0.size() != d || sv.sigma_hat.rows() != d)
    throw std::invalid_argument("chisq_region_stat: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sv.sigma_hat);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12)
    throw SingularError("chisq_region_stat: estimated covariance is singular; use a larger block size (smaller alpha_tilde) or more repeats");
  const Eigen::VectorXd diff = theta_hat - theta0;
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * diff;
  return static_cast<double>(sv.n) * (proj.array().square() / eig.eigenvalues().array()).sum();
}

ChisqTest chisq_test(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0, const SplitVariance& sv,
                     double alpha) {
  ChisqTest t;
  t.statistic = chisq_region_stat(theta_hat, theta0, sv);
  t.critical = chisq_quantile(1.0 - alpha, static_cast<int>(theta_hat.size()));
  t.reject = t.statistic > t.critical;
  return t;
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_p: a must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_continued_fraction(a, x);
}

double chisq_cdf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chisq_cdf: dof must be positive");
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chisq_quantile(double q, int dof) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("chisq_quantile: q must lie in (0, 1)");
  if (dof < 1) throw std::invalid_argument("chisq_quantile: dof must be positive");
  return bisect_quantile([dof](double x) { return chisq_cdf(x, dof); }, q, 0.0, std::max(1.0, 2.0 * dof));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("normal_quantile: q must lie in (0, 1)");
  if (q == 0.5) return 0.0;
  if (q < 0.5) return -normal_quantile(1.0 - q);
  return bisect_quantile(normal_cdf, q, 0.0, 1.0);
}

}  // namespace shapecox
