#pragma once

// Slow, independent reference implementations used only by the tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "shapecox/rng.hpp"
#include "shapecox/shape_solvers.hpp"
#include "shapecox/survival_core.hpp"

namespace oracle {

using shapecox::Dataset;
using shapecox::Index;
using shapecox::Shape;

// Random dataset; when ties > 0 times are rounded to multiples of 1/ties.
inline Dataset random_dataset(shapecox::Rng& rng, Index n, Index d, Index p, int ties = 0, double censor = 0.3) {
  Eigen::VectorXd t(n);
  Eigen::VectorXi s(n);
  Eigen::MatrixXd x(n, d), z(n, p);
  for (Index i = 0; i < n; ++i) {
    double v = -std::log(rng.uniform_open());
    if (ties > 0) v = std::ceil(v * ties) / ties;
    t(i) = v;
    s(i) = rng.uniform() < censor ? 0 : 1;
    for (Index k = 0; k < d; ++k) x(i, k) = rng.normal();
    for (Index k = 0; k < p; ++k) z(i, k) = rng.normal();
  }
  s(0) = 1;
  return Dataset(t, s, x, z);
}

inline Eigen::VectorXd random_vector(shapecox::Rng& rng, Index n, double scale = 1.0) {
  Eigen::VectorXd r(n);
  for (Index i = 0; i < n; ++i) r(i) = scale * rng.normal();
  return r;
}

inline std::vector<Index> risk_set_sizes(const Dataset& ds) {
  std::vector<Index> out(static_cast<std::size_t>(ds.size()), 0);
  for (Index i = 0; i < ds.size(); ++i)
    for (Index j = 0; j < ds.size(); ++j)
      if (ds.time()(j) >= ds.time()(i)) ++out[static_cast<std::size_t>(i)];
  return out;
}

inline double s0n(const Dataset& ds, const Eigen::VectorXd& r, double y) {
  double s = 0.0;
  for (Index j = 0; j < ds.size(); ++j)
    if (ds.time()(j) >= y) s += std::exp(r(j));
  return s / static_cast<double>(ds.size());
}

// Direct double loop, computed in long double without any shift.
inline double loglik(const Dataset& ds, const Eigen::VectorXd& r) {
  long double total = 0.0L;
  for (Index i = 0; i < ds.size(); ++i) {
    if (!ds.status()(i)) continue;
    long double denom = 0.0L;
    for (Index j = 0; j < ds.size(); ++j)
      if (ds.time()(j) >= ds.time()(i)) denom += std::exp(static_cast<long double>(r(j)));
    total += static_cast<long double>(r(i)) - std::log(denom);
  }
  return static_cast<double>(total / static_cast<long double>(ds.size()));
}

template <typename F>
Eigen::VectorXd central_gradient(F f, Eigen::VectorXd r, double h) {
  Eigen::VectorXd g(r.size());
  for (Index i = 0; i < r.size(); ++i) {
    const double r0 = r(i);
    r(i) = r0 + h;
    const double up = f(r);
    r(i) = r0 - h;
    const double down = f(r);
    r(i) = r0;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// Exact diagonal of the Hessian of -L_n in r.
inline Eigen::VectorXd hessian_diagonal(const Dataset& ds, const Eigen::VectorXd& r) {
  const double n = static_cast<double>(ds.size());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(ds.size());
  for (Index j = 0; j < ds.size(); ++j) {
    if (!ds.status()(j)) continue;
    double denom = 0.0;
    for (Index k = 0; k < ds.size(); ++k)
      if (ds.time()(k) >= ds.time()(j)) denom += std::exp(r(k));
    for (Index i = 0; i < ds.size(); ++i)
      if (ds.time()(i) >= ds.time()(j)) {
        const double p = std::exp(r(i)) / denom;
        h(i) += (p - p * p) / n;
      }
  }
  return h;
}

// Breslow by the defining sum over events.
inline double breslow(const Dataset& ds, const Eigen::VectorXd& r, double y) {
  double total = 0.0;
  for (Index j = 0; j < ds.size(); ++j)
    if (ds.status()(j) && y >= ds.time()(j)) total += 1.0 / s0n(ds, r, ds.time()(j));
  return total / static_cast<double>(ds.size());
}

// Nelson-Aalen: sum over distinct event times of d(t) / #at risk(t).
inline double nelson_aalen(const Dataset& ds, double y) {
  std::map<double, int> deaths;
  for (Index i = 0; i < ds.size(); ++i)
    if (ds.status()(i)) ++deaths[ds.time()(i)];
  double total = 0.0;
  for (const auto& [t, d] : deaths) {
    if (t > y) break;
    int at_risk = 0;
    for (Index i = 0; i < ds.size(); ++i)
      if (ds.time()(i) >= t) ++at_risk;
    total += static_cast<double>(d) / at_risk;
  }
  return total;
}

// ---- shape-restricted least squares over values at distinct knots -------

// Rows a with a.f >= 0 describing the shape cone for values f at knots x.
inline Eigen::MatrixXd shape_constraints(std::span<const double> x, Shape shape) {
  const Index m = static_cast<Index>(x.size());
  std::vector<Eigen::VectorXd> rows;
  auto slope = [&](Index k) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
    const double h = x[static_cast<std::size_t>(k + 1)] - x[static_cast<std::size_t>(k)];
    a(k) = -1.0 / h;
    a(k + 1) = 1.0 / h;
    return a;
  };
  const auto curv = shapecox::curvature_part(shape);
  const auto mono = shapecox::monotone_part(shape);
  if (curv == shapecox::Curvature::None) {
    const double sign = *mono == shapecox::Direction::Increasing ? 1.0 : -1.0;
    for (Index k = 0; k + 1 < m; ++k) rows.push_back(sign * slope(k));
  } else {
    const double sign = curv == shapecox::Curvature::Convex ? 1.0 : -1.0;
    for (Index k = 0; k + 2 < m; ++k) rows.push_back(sign * (slope(k + 1) - slope(k)));
    if (mono) {
      // The binding end of the slope sequence.
      const bool inc = *mono == shapecox::Direction::Increasing;
      const bool convex = curv == shapecox::Curvature::Convex;
      const Index k = (inc == convex) ? 0 : m - 2;
      rows.push_back((inc ? 1.0 : -1.0) * slope(k));
    }
  }
  Eigen::MatrixXd a(static_cast<Index>(rows.size()), m);
  for (Index i = 0; i < a.rows(); ++i) a.row(i) = rows[static_cast<std::size_t>(i)].transpose();
  return a;
}

inline double sse(std::span<const double> f, std::span<const double> y, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * (y[i] - f[i]) * (y[i] - f[i]);
  return s;
}

// Exact QP minimizer by enumerating every candidate active set: on each
// face solve the equality-constrained weighted least squares in a nullspace
// basis, keep the best feasible point. Exponential; use for m <= 8.
inline std::vector<double> qp_enumerate(std::span<const double> x, std::span<const double> y,
                                        std::span<const double> w, Shape shape) {
  const Eigen::MatrixXd a = shape_constraints(x, shape);
  const Index m = static_cast<Index>(x.size());
  const Index c = a.rows();
  Eigen::VectorXd yv(m), sw(m);
  for (Index i = 0; i < m; ++i) {
    yv(i) = y[static_cast<std::size_t>(i)];
    sw(i) = std::sqrt(w[static_cast<std::size_t>(i)]);
  }
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_f = Eigen::VectorXd::Zero(m);
  for (unsigned mask = 0; mask < (1u << c); ++mask) {
    Eigen::MatrixXd as(0, m);
    for (Index k = 0; k < c; ++k)
      if (mask & (1u << k)) {
        as.conservativeResize(as.rows() + 1, m);
        as.row(as.rows() - 1) = a.row(k);
      }
    Eigen::MatrixXd basis;
    if (as.rows() == 0) {
      basis = Eigen::MatrixXd::Identity(m, m);
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(as, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      Index rank = 0;
      for (Index k = 0; k < sv.size(); ++k)
        if (sv(k) > 1e-10 * sv(0)) ++rank;
      if (rank == m) {
        basis = Eigen::MatrixXd::Zero(m, 0);
      } else {
        basis = svd.matrixV().rightCols(m - rank);
      }
    }
    Eigen::VectorXd f = Eigen::VectorXd::Zero(m);
    if (basis.cols() > 0) {
      const Eigen::MatrixXd wb = sw.asDiagonal() * basis;
      const Eigen::VectorXd coef = wb.colPivHouseholderQr().solve(sw.cwiseProduct(yv));
      f = basis * coef;
    }
    if (c > 0 && (a * f).minCoeff() < -1e-10 * (1.0 + f.cwiseAbs().maxCoeff())) continue;
    const double s = (sw.cwiseProduct(f - yv)).squaredNorm();
    if (s < best) {
      best = s;
      best_f = f;
    }
  }
  return {best_f.data(), best_f.data() + m};
}

// Interior-point (log-barrier Newton) QP oracle for larger instances. The
// barrier objective t/2 * SSE - sum log(a.f) is followed up to t = 1e13.
inline std::vector<double> qp_barrier(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> w, Shape shape) {
  const Eigen::MatrixXd a = shape_constraints(x, shape);
  const Index m = static_cast<Index>(x.size());
  Eigen::VectorXd yv(m), wv(m), f(m);
  const double lo = x.front(), span_x = x.back() - x.front();
  const auto curv = shapecox::curvature_part(shape);
  const auto mono = shapecox::monotone_part(shape);
  const bool inc = mono && *mono == shapecox::Direction::Increasing;
  for (Index i = 0; i < m; ++i) {
    yv(i) = y[static_cast<std::size_t>(i)];
    wv(i) = w[static_cast<std::size_t>(i)];
    const double u = (x[static_cast<std::size_t>(i)] - lo) / span_x;
    // Strictly feasible start for every cone.
    if (curv == shapecox::Curvature::None)
      f(i) = inc ? u : -u;
    else if (!mono)
      f(i) = (curv == shapecox::Curvature::Convex ? 1.0 : -1.0) * (u - 0.5) * (u - 0.5);
    else if (curv == shapecox::Curvature::Convex)
      f(i) = inc ? u + u * u : -u + 0.25 * u * u;
    else
      f(i) = inc ? u - 0.25 * u * u : -u - u * u;
  }
  auto objective = [&](const Eigen::VectorXd& v, double t, bool& feasible) {
    const Eigen::VectorXd s = a * v;
    feasible = a.rows() == 0 || s.minCoeff() > 0.0;
    if (!feasible) return std::numeric_limits<double>::infinity();
    return 0.5 * t * (wv.array() * (v - yv).array().square()).sum() - s.array().log().sum();
  };
  for (double t = 1.0; t <= 1e13; t *= 4.0) {
    for (int it = 0; it < 200; ++it) {
      const Eigen::VectorXd s = a * f;
      const Eigen::VectorXd inv = s.cwiseInverse();
      const Eigen::VectorXd grad = t * wv.cwiseProduct(f - yv) - a.transpose() * inv;
      const Eigen::MatrixXd hess =
          Eigen::MatrixXd(t * wv.asDiagonal()) + a.transpose() * inv.cwiseAbs2().asDiagonal() * a;
      const Eigen::VectorXd step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (decrement < 1e-14) break;
      bool feasible = false;
      const double f0 = objective(f, t, feasible);
      double alpha = 1.0;
      for (int k = 0; k < 80; ++k, alpha *= 0.5) {
        bool ok = false;
        const double f1 = objective(f + alpha * step, t, ok);
        if (ok && f1 <= f0 - 0.25 * alpha * decrement) break;
      }
      f += alpha * step;
    }
  }
  return {f.data(), f.data() + m};
}

// Collapse tied x to distinct knots: weighted mean response, summed weight.
struct Pooled {
  std::vector<double> x, y, w;
};

inline Pooled pool_ties(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  std::map<double, std::pair<double, double>> acc;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto& [sy, sw] = acc[x[i]];
    sy += w[i] * y[i];
    sw += w[i];
  }
  Pooled p;
  for (const auto& [k, v] : acc) {
    p.x.push_back(k);
    p.y.push_back(v.first / v.second);
    p.w.push_back(v.second);
  }
  return p;
}

// Weighted SSE on the original points of values given at pooled knots.
inline double sse_at_points(const Pooled& p, std::span<const double> f, std::span<const double> x,
                            std::span<const double> y, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto k = static_cast<std::size_t>(std::lower_bound(p.x.begin(), p.x.end(), x[i]) - p.x.begin());
    s += w[i] * (y[i] - f[k]) * (y[i] - f[k]);
  }
  return s;
}

}  // namespace oracle
