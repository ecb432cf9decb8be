#include "shapecox/shape_solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "shapecox/errors.hpp"

namespace shapecox {

namespace {

struct ShapeEntry {
  Shape shape;
  std::string_view name;
};

constexpr ShapeEntry kShapeNames[] = {
    {Shape::Increasing, "inc"},           {Shape::Decreasing, "dec"},
    {Shape::Convex, "cvx"},               {Shape::Concave, "ccv"},
    {Shape::IncreasingConvex, "inc-cvx"}, {Shape::IncreasingConcave, "inc-ccv"},
    {Shape::DecreasingConvex, "dec-cvx"}, {Shape::DecreasingConcave, "dec-ccv"},
};

void check_weights(std::span<const double> w) {
  for (double v : w)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("weights must be positive and finite");
}

// Hinge-basis layout for one shape on knots t_0 < ... < t_{m-1}.
// Column 0 is the intercept, column 1 the linear term, column 1 + k the hinge
// at interior knot k (1 <= k <= m - 2). The linear term is free unless the
// shape also carries a monotone direction, in which case its sign is fixed.
struct HingeBasis {
  std::span<const double> t;
  bool slope_free = true;
  double slope_sign = 1.0;
  double slope_anchor = 0.0;
  bool left_hinges = false;  // (t_k - t)_+ instead of (t - t_k)_+
  double hinge_sign = 1.0;

  HingeBasis(std::span<const double> knots, Shape shape) : t(knots) {
    const double lo = t.front();
    const double hi = t.back();
    slope_anchor = lo;
    switch (shape) {
      case Shape::Convex:
        break;
      case Shape::Concave:
        hinge_sign = -1.0;
        break;
      case Shape::IncreasingConvex:
        slope_free = false;
        break;
      case Shape::DecreasingConcave:
        slope_free = false;
        slope_sign = -1.0;
        hinge_sign = -1.0;
        break;
      case Shape::IncreasingConcave:
        slope_free = false;
        slope_anchor = hi;
        left_hinges = true;
        hinge_sign = -1.0;
        break;
      case Shape::DecreasingConvex:
        slope_free = false;
        slope_sign = -1.0;
        slope_anchor = hi;
        left_hinges = true;
        break;
      default:
        throw std::invalid_argument("hinge basis requires a shape with curvature");
    }
  }

  Index size() const { return static_cast<Index>(t.size()); }

  double column(Index c, Index i) const {
    const double ti = t[static_cast<std::size_t>(i)];
    if (c == 0) return 1.0;
    if (c == 1) return slope_sign * (ti - slope_anchor);
    const double tk = t[static_cast<std::size_t>(c - 1)];
    return hinge_sign * (left_hinges ? std::max(tk - ti, 0.0) : std::max(ti - tk, 0.0));
  }

  // Gradient of -0.5 * sum w (y - f)^2 along every column, given w_i * res_i.
  void dual(const Eigen::VectorXd& wres, Eigen::VectorXd& out) const {
    const Index m = size();
    out.setZero(m);
    out(0) = wres.sum();
    double lin = 0.0;
    for (Index i = 0; i < m; ++i) lin += wres(i) * (t[static_cast<std::size_t>(i)] - slope_anchor);
    out(1) = slope_sign * lin;
    if (!left_hinges) {
      double sa = 0.0, sb = 0.0;  // sums over i > k
      for (Index k = m - 1; k >= 1; --k) {
        const double tk = t[static_cast<std::size_t>(k)];
        if (k <= m - 2) out(1 + k) = hinge_sign * (sa - tk * sb);
        sa += wres(k) * tk;
        sb += wres(k);
      }
    } else {
      double pa = 0.0, pb = 0.0;  // sums over i < k
      for (Index k = 0; k <= m - 2; ++k) {
        const double tk = t[static_cast<std::size_t>(k)];
        if (k >= 1) out(1 + k) = hinge_sign * (tk * pb - pa);
        pa += wres(k) * tk;
        pb += wres(k);
      }
    }
  }
};

class HingeNnls {
 public:
  HingeNnls(const HingeBasis& basis, std::span<const double> y, std::span<const double> w)
      : basis_(basis), m_(basis.size()), y_(m_), sw_(m_) {
    for (Index i = 0; i < m_; ++i) {
      y_(i) = y[static_cast<std::size_t>(i)];
      sw_(i) = std::sqrt(w[static_cast<std::size_t>(i)]);
    }
    const double wsum = sw_.squaredNorm();
    const double ybar = sw_.cwiseProduct(sw_).dot(y_) / wsum;
    const double spread = (y_.array() - ybar).abs().maxCoeff();
    const double span = basis_.t.back() - basis_.t.front();
    tol_ = 1e-10 * wsum * std::max(spread, 1e-300) * std::max(span, 1e-300);
    max_iters_ = 10 * m_;
  }

  // Returns coefficients; `active` holds hinge/slope columns in the support on
  // input (warm start) and on output.
  Eigen::VectorXd solve(std::vector<int>& active) {
    const Index ncols = m_;
    in_.assign(static_cast<std::size_t>(ncols), 0);
    constrained_.assign(static_cast<std::size_t>(ncols), 1);
    constrained_[0] = 0;
    in_[0] = 1;
    if (basis_.slope_free) {
      constrained_[1] = 0;
      in_[1] = 1;
    }
    for (int c : active)
      if (c >= 1 && c < ncols && constrained_[static_cast<std::size_t>(c)]) in_[static_cast<std::size_t>(c)] = 1;

    // Feasible start: drop warm-start columns until the restricted fit is
    // strictly inside the cone.
    Eigen::VectorXd x = least_squares();
    for (;;) {
      Index worst = -1;
      double worst_val = 0.0;
      for (Index c = 0; c < ncols; ++c)
        if (in_[static_cast<std::size_t>(c)] && constrained_[static_cast<std::size_t>(c)] && x(c) <= worst_val) {
          worst = c;
          worst_val = x(c);
        }
      if (worst < 0) break;
      in_[static_cast<std::size_t>(worst)] = 0;
      x = least_squares();
    }

    std::vector<char> blocked(static_cast<std::size_t>(ncols), 0);
    Eigen::VectorXd wres(m_), grad(m_);
    Index iters = 0;
    for (;;) {
      if (++iters > max_iters_) throw FitError("shape solver: active-set iteration limit reached");
      const Eigen::VectorXd fitted = evaluate(x);
      wres = sw_.cwiseProduct(sw_).cwiseProduct(y_ - fitted);
      basis_.dual(wres, grad);
      Index best = -1;
      double best_val = tol_;
      for (Index c = 1; c < ncols; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        if (!in_[cs] && constrained_[cs] && !blocked[cs] && grad(c) > best_val) {
          best = c;
          best_val = grad(c);
        }
      }
      if (best < 0) break;
      in_[static_cast<std::size_t>(best)] = 1;
      Eigen::VectorXd z = least_squares();
      if (z(best) <= 0.0) {
        in_[static_cast<std::size_t>(best)] = 0;
        blocked[static_cast<std::size_t>(best)] = 1;
        continue;
      }
      for (;;) {
        double alpha = 2.0;
        Index hit = -1;
        for (Index c = 0; c < ncols; ++c) {
          const auto cs = static_cast<std::size_t>(c);
          if (in_[cs] && constrained_[cs] && z(c) <= 0.0) {
            const double a = x(c) / (x(c) - z(c));
            if (a < alpha) {
              alpha = a;
              hit = c;
            }
          }
        }
        if (hit < 0) break;
        if (++iters > max_iters_) throw FitError("shape solver: active-set iteration limit reached");
        x += alpha * (z - x);
        x(hit) = 0.0;
        for (Index c = 0; c < ncols; ++c) {
          const auto cs = static_cast<std::size_t>(c);
          if (in_[cs] && constrained_[cs] && x(c) <= 0.0) {
            in_[cs] = 0;
            x(c) = 0.0;
          }
        }
        z = least_squares();
      }
      x = z;
      std::fill(blocked.begin(), blocked.end(), 0);
    }

    active.clear();
    for (Index c = 1; c < ncols; ++c)
      if (in_[static_cast<std::size_t>(c)] && constrained_[static_cast<std::size_t>(c)]) active.push_back(static_cast<int>(c));
    for (Index c = 0; c < ncols; ++c)
      if (!in_[static_cast<std::size_t>(c)]) x(c) = 0.0;
    return x;
  }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& coef) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(m_);
    for (Index c = 0; c < m_; ++c) {
      if (coef(c) == 0.0) continue;
      for (Index i = 0; i < m_; ++i) f(i) += coef(c) * basis_.column(c, i);
    }
    return f;
  }

 private:
  Eigen::VectorXd least_squares() const {
    std::vector<Index> cols;
    for (Index c = 0; c < m_; ++c)
      if (in_[static_cast<std::size_t>(c)]) cols.push_back(c);
    Eigen::MatrixXd a(m_, static_cast<Index>(cols.size()));
    for (Index k = 0; k < static_cast<Index>(cols.size()); ++k)
      for (Index i = 0; i < m_; ++i) a(i, k) = sw_(i) * basis_.column(cols[static_cast<std::size_t>(k)], i);
    const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(sw_.cwiseProduct(y_));
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
    for (Index k = 0; k < static_cast<Index>(cols.size()); ++k) out(cols[static_cast<std::size_t>(k)]) = sol(k);
    return out;
  }

  const HingeBasis& basis_;
  Index m_;
  Eigen::VectorXd y_;
  Eigen::VectorXd sw_;
  std::vector<char> in_;
  std::vector<char> constrained_;
  double tol_ = 0.0;
  Index max_iters_ = 0;
};

std::vector<double> solve_pooled(std::span<const double> t, std::span<const double> y, std::span<const double> w,
                                 Shape shape, std::vector<int>& active) {
  const std::size_t m = t.size();
  if (m == 1) return {y[0]};
  if (!has_curvature(shape)) return weighted_isotonic(y, w, *monotone_part(shape));
  const HingeBasis basis(t, shape);
  HingeNnls solver(basis, y, w);
  const Eigen::VectorXd coef = solver.solve(active);
  const Eigen::VectorXd f = solver.evaluate(coef);
  return {f.data(), f.data() + f.size()};
}

}  // namespace

std::optional<Direction> monotone_part(Shape s) {
  switch (s) {
    case Shape::Increasing:
    case Shape::IncreasingConvex:
    case Shape::IncreasingConcave:
      return Direction::Increasing;
    case Shape::Decreasing:
    case Shape::DecreasingConvex:
    case Shape::DecreasingConcave:
      return Direction::Decreasing;
    default:
      return std::nullopt;
  }
}

Curvature curvature_part(Shape s) {
  switch (s) {
    case Shape::Convex:
    case Shape::IncreasingConvex:
    case Shape::DecreasingConvex:
      return Curvature::Convex;
    case Shape::Concave:
    case Shape::IncreasingConcave:
    case Shape::DecreasingConcave:
      return Curvature::Concave;
    default:
      return Curvature::None;
  }
}

std::string_view shape_name(Shape s) {
  for (const auto& e : kShapeNames)
    if (e.shape == s) return e.name;
  return "?";
}

std::string valid_shape_names() {
  std::string out;
  for (const auto& e : kShapeNames) {
    if (!out.empty()) out += ", ";
    out += e.name;
  }
  return out;
}

Shape parse_shape(std::string_view name) {
  for (const auto& e : kShapeNames)
    if (e.name == name) return e.shape;
  throw std::invalid_argument("unknown shape '" + std::string(name) + "'; valid shapes: " + valid_shape_names());
}

double eval_component(const AdditiveComponent& c, double t) {
  const auto& k = c.knots;
  const auto& v = c.values;
  if (k.empty()) return 0.0;
  if (k.size() == 1) return v.front();
  const bool linear_tails = has_curvature(c.shape);
  if (t <= k.front()) {
    if (!linear_tails || t == k.front()) return v.front();
    return v[0] + (v[1] - v[0]) / (k[1] - k[0]) * (t - k[0]);
  }
  if (t >= k.back()) {
    const std::size_t m = k.size();
    if (!linear_tails || t == k.back()) return v.back();
    return v[m - 1] + (v[m - 1] - v[m - 2]) / (k[m - 1] - k[m - 2]) * (t - k[m - 1]);
  }
  const auto hi = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), t) - k.begin());
  const std::size_t lo = hi - 1;
  if (t == k[lo]) return v[lo];
  const double frac = (t - k[lo]) / (k[hi] - k[lo]);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double AdditiveComponent::operator()(double t) const { return eval_component(*this, t); }

bool satisfies_shape(const AdditiveComponent& c, double tol) {
  const auto& k = c.knots;
  const auto& v = c.values;
  if (k.size() != v.size()) return false;
  for (std::size_t i = 1; i < k.size(); ++i)
    if (!(k[i] > k[i - 1])) return false;
  if (k.size() < 2) return true;
  double vscale = 0.0;
  for (double x : v) vscale = std::max(vscale, std::abs(x));
  const double dtol = tol * (1.0 + vscale);
  if (const auto dir = monotone_part(c.shape)) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double diff = v[i] - v[i - 1];
      if (*dir == Direction::Increasing ? diff < -dtol : diff > dtol) return false;
    }
  }
  const Curvature curv = curvature_part(c.shape);
  if (curv != Curvature::None) {
    std::vector<double> slopes;
    double sscale = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      slopes.push_back((v[i] - v[i - 1]) / (k[i] - k[i - 1]));
      sscale = std::max(sscale, std::abs(slopes.back()));
    }
    const double stol = tol * (1.0 + sscale);
    for (std::size_t i = 1; i < slopes.size(); ++i) {
      const double diff = slopes[i] - slopes[i - 1];
      if (curv == Curvature::Convex ? diff < -stol : diff > stol) return false;
    }
  }
  return true;
}

std::vector<double> weighted_isotonic(std::span<const double> y, std::span<const double> w, Direction direction) {
  if (y.size() != w.size()) throw std::invalid_argument("weighted_isotonic: y and w differ in length");
  if (y.empty()) throw std::invalid_argument("weighted_isotonic: empty input");
  check_weights(w);
  const double sign = direction == Direction::Increasing ? 1.0 : -1.0;

  struct Block {
    double wsum;
    double mean;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    Block b{w[i], sign * y[i], 1};
    while (!blocks.empty() && blocks.back().mean >= b.mean) {
      const Block& prev = blocks.back();
      const double ws = prev.wsum + b.wsum;
      b.mean = (prev.wsum * prev.mean + b.wsum * b.mean) / ws;
      b.wsum = ws;
      b.count += prev.count;
      blocks.pop_back();
    }
    blocks.push_back(b);
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, sign * b.mean);
  return out;
}

AdditiveComponent weighted_convex_pl(std::span<const double> x, std::span<const double> y, std::span<const double> w,
                                     Shape shape) {
  if (x.size() != y.size() || x.size() != w.size())
    throw std::invalid_argument("weighted_convex_pl: x, y and w differ in length");
  if (x.size() < 2) throw std::invalid_argument("weighted_convex_pl: at least two knots required");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw std::invalid_argument("weighted_convex_pl: knots must be strictly increasing");
  if (!has_curvature(shape)) throw std::invalid_argument("weighted_convex_pl: shape has no convex/concave part");
  check_weights(w);
  std::vector<int> active;
  AdditiveComponent c;
  c.knots.assign(x.begin(), x.end());
  c.values = solve_pooled(x, y, w, shape, active);
  c.shape = shape;
  return c;
}

ShapeProjector::ShapeProjector(std::span<const double> x, Shape shape) : shape_(shape) {
  if (x.empty()) throw std::invalid_argument("ShapeProjector: empty covariate");
  std::vector<Index> idx(x.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return x[static_cast<std::size_t>(a)] < x[static_cast<std::size_t>(b)]; });
  knot_of_.resize(x.size());
  for (Index i : idx) {
    const double v = x[static_cast<std::size_t>(i)];
    if (!std::isfinite(v)) throw std::invalid_argument("ShapeProjector: non-finite covariate value");
    if (knots_.empty() || v != knots_.back()) knots_.push_back(v);
    knot_of_[static_cast<std::size_t>(i)] = static_cast<Index>(knots_.size()) - 1;
  }
}

std::vector<double> ShapeProjector::project(std::span<const double> y, std::span<const double> w) {
  if (y.size() != knot_of_.size() || w.size() != knot_of_.size())
    throw std::invalid_argument("ShapeProjector::project: length mismatch");
  check_weights(w);
  const std::size_t m = knots_.size();
  std::vector<double> wsum(m, 0.0), ysum(m, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto k = static_cast<std::size_t>(knot_of_[i]);
    wsum[k] += w[i];
    ysum[k] += w[i] * y[i];
  }
  for (std::size_t k = 0; k < m; ++k) ysum[k] /= wsum[k];
  return solve_pooled(knots_, ysum, wsum, shape_, active_);
}

AdditiveComponent fit_shape(std::span<const double> x, std::span<const double> y, std::span<const double> w,
                            Shape shape) {
  if (x.size() != y.size() || x.size() != w.size()) throw std::invalid_argument("fit_shape: length mismatch");
  ShapeProjector projector(x, shape);
  AdditiveComponent c;
  c.values = projector.project(y, w);
  c.knots = projector.knots();
  c.shape = shape;
  return c;
}

double weighted_sse(const AdditiveComponent& c, std::span<const double> x, std::span<const double> y,
                    std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - eval_component(c, x[i]);
    s += w[i] * r * r;
  }
  return s;
}

}  // namespace shapecox
