#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "shapecox/errors.hpp"
#include "shapecox/rng.hpp"
#include "shapecox/variance_inference.hpp"

using namespace shapecox;

namespace {

std::vector<double> draws(std::uint64_t seed, Index n, double sd) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

SubsampleEstimator mean_of(const std::vector<double>& data) {
  return [&data](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(1);
    for (Index i : rows) m(0) += data[static_cast<std::size_t>(i)];
    m /= static_cast<double>(rows.size());
    return m;
  };
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
}

}  // namespace

TEST_CASE("block counts") {
  CHECK(split_sizes(4096, 0.5) == std::pair<Index, Index>{64, 64});
  CHECK(split_sizes(600, 0.35) == std::pair<Index, Index>{9, 63});
  CHECK(split_sizes(100, 0.5) == std::pair<Index, Index>{10, 10});
}

TEST_CASE("a constant estimator has zero variance") {
  SubsampleEstimator est = [](std::span<const Index>) -> std::optional<Eigen::VectorXd> {
    return Eigen::VectorXd::Constant(2, 3.0);
  };
  SplitOptions o;
  o.repeats = 3;
  const auto sv = split_variance(500, est, o);
  CHECK(sv.sigma_hat.isZero(0.0));
}

TEST_CASE("sample mean with variance 4 lands in [3, 5] for nearly every seed") {
  int inside = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto data = draws(500 + static_cast<std::uint64_t>(s), 4096, 2.0);
    SplitOptions o;
    o.alpha_tilde = 0.5;
    o.repeats = 20;
    o.seed = static_cast<std::uint64_t>(s);
    const double v = split_variance(4096, mean_of(data), o).sigma_hat(0, 0);
    if (v >= 3.0 && v <= 5.0) ++inside;
  }
  CHECK(inside >= 98);
}

TEST_CASE("two-dimensional estimator: (mean, mean of squares) of standard normals") {
  const auto data = draws(9, 4096, 1.0);
  SubsampleEstimator est = [&data](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
    for (Index i : rows) {
      const double v = data[static_cast<std::size_t>(i)];
      m(0) += v;
      m(1) += v * v;
    }
    return m / static_cast<double>(rows.size());
  };
  SplitOptions o;
  o.alpha_tilde = 0.5;
  o.repeats = 20;
  o.seed = 3;
  const auto sv = split_variance(4096, est, o);
  Eigen::Matrix2d truth;
  truth << 1, 0, 0, 2;
  CHECK((sv.sigma_hat - truth).cwiseAbs().maxCoeff() <= 0.3);
  CHECK(sv.sigma_hat == sv.sigma_hat.transpose());
}

TEST_CASE("same seed gives the same estimate for any thread count") {
  const auto data = draws(10, 3000, 1.5);
  SplitOptions o;
  o.seed = 77;
  o.threads = 1;
  const auto a = split_variance(3000, mean_of(data), o);
  o.threads = 4;
  const auto b = split_variance(3000, mean_of(data), o);
  CHECK(a.sigma_hat == b.sigma_hat);
}

TEST_CASE("affine equivariance") {
  const auto data = draws(11, 2000, 1.0);
  SubsampleEstimator est = [&data](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
    for (Index i : rows) {
      const double v = data[static_cast<std::size_t>(i)];
      m(0) += v;
      m(1) += std::abs(v);
    }
    return m / static_cast<double>(rows.size());
  };
  Eigen::Matrix2d a;
  a << 2, 1, -1, 3;
  const Eigen::Vector2d shift(5, -7);
  SubsampleEstimator mapped = [&](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
    return Eigen::VectorXd(a * *est(rows) + shift);
  };
  SplitOptions o;
  o.seed = 4;
  const auto base = split_variance(2000, est, o);
  const auto image = split_variance(2000, mapped, o);
  CHECK((image.sigma_hat - a * base.sigma_hat * a.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("failing blocks are redrawn; repeats that keep failing are dropped") {
  const auto data = draws(12, 1000, 1.0);
  // Fails whenever row 0 is in the block.
  SubsampleEstimator flaky = [&data](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
    for (Index i : rows)
      if (i == 0) return std::nullopt;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(1);
    for (Index i : rows) m(0) += data[static_cast<std::size_t>(i)];
    return m / static_cast<double>(rows.size());
  };
  SplitOptions o;
  o.repeats = 10;
  o.seed = 5;
  const auto sv = split_variance(1000, flaky, o);
  CHECK(sv.repeats + sv.dropped_repeats == 10);
  CHECK(sv.repeats >= 1);
  CHECK_FALSE(sv.warnings.empty());

  SubsampleEstimator broken = [](std::span<const Index>) -> std::optional<Eigen::VectorXd> {
    throw std::runtime_error("no");
  };
  CHECK_THROWS_AS(split_variance(1000, broken, o), FitError);
}

TEST_CASE("split_variance argument checks") {
  const auto data = draws(13, 100, 1.0);
  SplitOptions o;
  o.alpha_tilde = 1.0;
  CHECK_THROWS_AS(split_variance(100, mean_of(data), o), std::invalid_argument);
  o.alpha_tilde = 0.3;
  o.repeats = 0;
  CHECK_THROWS_AS(split_variance(100, mean_of(data), o), std::invalid_argument);
}

TEST_CASE("Wald interval") {
  SplitVariance sv;
  sv.sigma_hat = Eigen::MatrixXd::Constant(1, 1, 1.0);
  sv.n = 100;
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, -2.0);
  const auto [lo, hi] = wald_interval(theta, sv, 0.95, 0);
  CHECK(lo == doctest::Approx(-2.0 - 0.1959964).epsilon(1e-6));
  CHECK(hi == doctest::Approx(-2.0 + 0.1959964).epsilon(1e-6));
  CHECK(hi - lo == doctest::Approx(2.0 * 0.1 * normal_quantile(0.975)).epsilon(1e-14));
  sv.sigma_hat(0, 0) = 0.0;
  const auto [a, b] = wald_interval(theta, sv, 0.95, 0);
  CHECK(a == -2.0);
  CHECK(b == -2.0);
  CHECK_THROWS_AS(wald_interval(theta, sv, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(wald_interval(theta, sv, 0.9, 1), std::invalid_argument);
}

TEST_CASE("chi-square statistic") {
  SplitVariance sv;
  sv.sigma_hat = Eigen::MatrixXd::Constant(1, 1, 2.5);
  sv.n = 400;
  Eigen::VectorXd th(1), th0(1);
  th << 0.3;
  th0 << 0.1;
  CHECK(chisq_region_stat(th, th, sv) == 0.0);
  CHECK(chisq_region_stat(th, th0, sv) == doctest::Approx(400.0 * 0.04 / 2.5).epsilon(1e-13));

  // Invariance under a linear reparameterization.
  Eigen::Matrix2d s;
  s << 2.0, 0.3, 0.3, 0.5;
  SplitVariance sv2;
  sv2.sigma_hat = s;
  sv2.n = 250;
  const Eigen::Vector2d t(0.4, -0.2), t0(0.1, 0.1);
  Eigen::Matrix2d a;
  a << 1.5, -2.0, 0.7, 3.0;
  SplitVariance mapped = sv2;
  mapped.sigma_hat = a * s * a.transpose();
  const double base = chisq_region_stat(t, t0, sv2);
  const double image = chisq_region_stat(a * t, a * t0, mapped);
  CHECK(std::abs(base - image) <= 1e-8 * (1.0 + base));

  sv2.sigma_hat << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(chisq_region_stat(t, t0, sv2), SingularError);

  const auto test = chisq_test(t, t0, mapped, 0.05);
  CHECK(test.critical == doctest::Approx(5.991465).epsilon(1e-6));
  CHECK(test.reject == (test.statistic > test.critical));
}

TEST_CASE("chi-square quantiles") {
  CHECK(chisq_quantile(0.95, 1) == doctest::Approx(3.841459).epsilon(1e-6));
  CHECK(chisq_quantile(0.95, 2) == doctest::Approx(5.991465).epsilon(1e-6));
  for (double q : {1e-6, 0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99, 0.999999}) {
    CHECK(std::abs(chisq_quantile(q, 2) + 2.0 * std::log(1.0 - q)) <= 1e-9 * std::max(1.0, -2.0 * std::log(1.0 - q)));
    for (int dof : {1, 2, 3, 5, 10, 30, 100})
      CHECK(std::abs(chisq_cdf(chisq_quantile(q, dof), dof) - q) <= 1e-9);
  }
  CHECK_THROWS_AS(chisq_quantile(0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(chisq_quantile(0.5, 0), std::invalid_argument);
}

TEST_CASE("normal quantiles") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-9));
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963985).epsilon(1e-9));
  for (double q : {1e-10, 0.001, 0.3, 0.7, 0.999}) CHECK(std::abs(normal_cdf(normal_quantile(q)) - q) <= 1e-12);
  CHECK(regularized_gamma_p(1.0, 2.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("variance estimates improve with n") {
  std::vector<double> med;
  for (Index n : {1024, 4096, 16384}) {
    std::vector<double> err;
    for (int s = 0; s < 20; ++s) {
      const auto data = draws(900 + static_cast<std::uint64_t>(s), n, 2.0);
      SplitOptions o;
      o.alpha_tilde = 0.5;
      o.seed = static_cast<std::uint64_t>(s);
      err.push_back(std::abs(split_variance(n, mean_of(data), o).sigma_hat(0, 0) - 4.0));
    }
    med.push_back(median(err));
  }
  CHECK(med[1] < med[0]);
  CHECK(med[2] < med[1]);
}
