#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapecox/survival_core.hpp"

namespace shapecox {

// Shape restriction of one additive component. Codes 1-4 are the four basic
// shapes; the remaining kinds combine a monotone direction with a curvature.
enum class Shape {
  Increasing = 1,
  Decreasing = 2,
  Convex = 3,
  Concave = 4,
  IncreasingConvex = 5,
  IncreasingConcave = 6,
  DecreasingConvex = 7,
  DecreasingConcave = 8,
};

enum class Direction { Increasing, Decreasing };
enum class Curvature { None, Convex, Concave };

std::optional<Direction> monotone_part(Shape s);
Curvature curvature_part(Shape s);
inline bool has_curvature(Shape s) { return curvature_part(s) != Curvature::None; }

// Short names used on the command line: inc, dec, cvx, ccv, inc-cvx, ...
std::string_view shape_name(Shape s);
// Throws std::invalid_argument listing the valid names.
Shape parse_shape(std::string_view name);
std::string valid_shape_names();

// Piecewise-linear function stored by its values at sorted, distinct knots.
struct AdditiveComponent {
  std::vector<double> knots;
  std::vector<double> values;
  Shape shape = Shape::Increasing;

  double operator()(double t) const;
};

// Linear interpolation between knots. Outside the knot range: constant for
// pure monotone shapes, continuation of the boundary segment otherwise.
double eval_component(const AdditiveComponent& c, double t);

// True when values obey the monotone / slope-ordering rules of c.shape up to
// `tol` (absolute on differences, relative to the value scale).
bool satisfies_shape(const AdditiveComponent& c, double tol = 1e-9);

// Minimizer of sum w_i (y_i - f_i)^2 over monotone f (pool adjacent violators).
std::vector<double> weighted_isotonic(std::span<const double> y, std::span<const double> w,
                                      Direction direction);

// Minimizer of sum w_i (y_i - f(x_i))^2 over piecewise-linear f with knots in x
// that satisfy the curvature (and optional monotone) part of `shape`. Uses a
// hinge basis a + b t + sum c_k (t - x_k)_+ with sign-constrained c_k, solved by
// an active-set non-negative least squares.
AdditiveComponent weighted_convex_pl(std::span<const double> x, std::span<const double> y,
                                     std::span<const double> w, Shape shape);

// Shape-restricted weighted least squares on raw (unsorted, possibly tied)
// covariate values. Tied x are pooled into one knot with the weighted mean
// response before solving.
AdditiveComponent fit_shape(std::span<const double> x, std::span<const double> y,
                            std::span<const double> w, Shape shape);

// Weighted SSE of a component against raw data.
double weighted_sse(const AdditiveComponent& c, std::span<const double> x, std::span<const double> y,
                    std::span<const double> w);

// Repeated projections onto one shape cone for a fixed covariate column, as
// done inside backfitting. Knot pooling is computed once; the convex solver
// is warm-started from the previous active set.
class ShapeProjector {
 public:
  ShapeProjector(std::span<const double> x, Shape shape);

  Shape shape() const { return shape_; }
  const std::vector<double>& knots() const { return knots_; }
  // Knot index of each observation.
  const std::vector<Index>& knot_of() const { return knot_of_; }

  // Fitted values at knots() for per-observation responses and weights.
  std::vector<double> project(std::span<const double> y, std::span<const double> w);

 private:
  Shape shape_;
  std::vector<double> knots_;
  std::vector<Index> knot_of_;
  std::vector<int> active_;
};

}  // namespace shapecox
