#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "shapecox/shape_solvers.hpp"

using namespace shapecox;

namespace {

constexpr Shape kAllShapes[] = {Shape::Increasing,       Shape::Decreasing,        Shape::Convex,
                                Shape::Concave,          Shape::IncreasingConvex,  Shape::IncreasingConcave,
                                Shape::DecreasingConvex, Shape::DecreasingConcave};

std::vector<double> values_at(const AdditiveComponent& c, std::span<const double> x) {
  std::vector<double> out;
  for (double t : x) out.push_back(eval_component(c, t));
  return out;
}

}  // namespace

TEST_CASE("shape names round-trip and unknown names list the valid ones") {
  for (Shape s : kAllShapes) CHECK(parse_shape(shape_name(s)) == s);
  CHECK(static_cast<int>(Shape::Increasing) == 1);
  CHECK(static_cast<int>(Shape::Concave) == 4);
  try {
    parse_shape("wavy");
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("inc-cvx") != std::string::npos);
    CHECK(msg.find("dec-ccv") != std::string::npos);
  }
}

TEST_CASE("weighted_isotonic hand examples") {
  const std::vector<double> one{1, 1, 1};
  CHECK(weighted_isotonic(std::vector<double>{1, 2, 3}, one, Direction::Increasing) == std::vector<double>{1, 2, 3});
  const auto a = weighted_isotonic(std::vector<double>{3, 1, 2}, one, Direction::Increasing);
  for (double v : a) CHECK(v == doctest::Approx(2.0).epsilon(1e-15));
  const auto b = weighted_isotonic(std::vector<double>{1, 3, 2}, std::vector<double>{1, 1, 2}, Direction::Increasing);
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
  CHECK(b[2] == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
  const auto c = weighted_isotonic(std::vector<double>{1, 2, 3}, one, Direction::Decreasing);
  for (double v : c) CHECK(v == doctest::Approx(2.0));
  CHECK_THROWS_AS(weighted_isotonic(std::vector<double>{1, 2}, std::vector<double>{1, 0}, Direction::Increasing),
                  std::invalid_argument);
}

TEST_CASE("weighted_isotonic: KKT against sampled monotone vectors, zero block sums") {
  Rng rng(21);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t m = 1 + rng.below(30);
    std::vector<double> y(m), w(m);
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = rng.normal() + 0.05 * static_cast<double>(i);
      w[i] = 0.1 + rng.uniform();
    }
    const auto dir = inst % 2 ? Direction::Increasing : Direction::Decreasing;
    const auto f = weighted_isotonic(y, w, dir);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> g(m);
      double acc = rng.normal();
      for (std::size_t i = 0; i < m; ++i) {
        acc += (dir == Direction::Increasing ? 1.0 : -1.0) * (rng.uniform() < 0.5 ? 0.0 : rng.uniform());
        g[i] = acc;
      }
      double inner = 0.0;
      for (std::size_t i = 0; i < m; ++i) inner += w[i] * (y[i] - f[i]) * (g[i] - f[i]);
      CHECK(inner <= 1e-10);
    }
    std::size_t start = 0;
    for (std::size_t i = 1; i <= m; ++i) {
      if (i == m || f[i] != f[start]) {
        double s = 0.0;
        for (std::size_t k = start; k < i; ++k) s += w[k] * (y[k] - f[k]);
        CHECK(std::abs(s) <= 1e-10);
        start = i;
      }
    }
  }
}

TEST_CASE("weighted_convex_pl hand examples") {
  const std::vector<double> x{0, 1, 2}, one{1, 1, 1};
  const auto a = weighted_convex_pl(x, std::vector<double>{0, 1, 0}, one, Shape::Convex);
  for (double v : a.values) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  const auto b = weighted_convex_pl(x, std::vector<double>{0, 1, 4}, one, Shape::Convex);
  CHECK(b.values[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.values[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.values[2] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_convex_pl(std::vector<double>{0}, std::vector<double>{1}, std::vector<double>{1},
                                     Shape::Convex),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_convex_pl(std::vector<double>{0, 0, 1}, one, one, Shape::Convex), std::invalid_argument);
  CHECK_THROWS_AS(weighted_convex_pl(x, one, one, Shape::Increasing), std::invalid_argument);
}

TEST_CASE("four-knot concave fits match the enumeration QP oracle") {
  Rng rng(8);
  const std::vector<double> x{0, 1, 2, 3};
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<double> y(4), w(4);
    for (int i = 0; i < 4; ++i) {
      y[static_cast<std::size_t>(i)] = rng.normal();
      w[static_cast<std::size_t>(i)] = 0.2 + rng.uniform();
    }
    const auto c = weighted_convex_pl(x, y, w, Shape::Concave);
    const auto o = oracle::qp_enumerate(x, y, w, Shape::Concave);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(c.values[i] - o[i]) <= 1e-8);
  }
}

TEST_CASE("every shape matches the enumeration QP oracle on small random instances") {
  Rng rng(2024);
  int checked = 0;
  for (int inst = 0; inst < 500; ++inst) {
    const Shape shape = kAllShapes[inst % 8];
    const std::size_t m = 2 + rng.below(6);
    std::vector<double> x(m), y(m), w(m);
    for (std::size_t i = 0; i < m; ++i) {
      x[i] = (i == 0 ? 0.0 : x[i - 1]) + 0.1 + rng.uniform();
      y[i] = 2.0 * rng.normal();
      w[i] = 0.1 + 2.0 * rng.uniform();
    }
    const auto c = fit_shape(x, y, w, shape);
    CHECK(satisfies_shape(c, 1e-9));
    const auto o = oracle::qp_enumerate(x, y, w, shape);
    const double ours = weighted_sse(c, x, y, w);
    const double best = oracle::sse(o, y, w);
    CHECK(ours <= best + 1e-6);
    CHECK(ours >= best - 1e-6);
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("fit_shape pools ties before solving") {
  const auto c = fit_shape(std::vector<double>{0.5, 0.5, 1.0}, std::vector<double>{1, 3, 5},
                           std::vector<double>{1, 1, 1}, Shape::Increasing);
  CHECK(c.knots == std::vector<double>{0.5, 1.0});
  CHECK(c.values[0] == doctest::Approx(2.0));
  CHECK(c.values[1] == doctest::Approx(5.0));
  const auto flat = fit_shape(std::vector<double>{3, 1, 2}, std::vector<double>{4, 4, 4},
                              std::vector<double>{1, 2, 3}, Shape::Increasing);
  for (double v : flat.values) CHECK(v == doctest::Approx(4.0));
}

TEST_CASE("n=200 shape fits are no worse than the interior-point QP oracle") {
  Rng rng(77);
  for (Shape shape : kAllShapes) {
    const std::size_t n = 200;
    std::vector<double> x(n), y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::round(rng.normal() * 50.0) / 50.0;  // some ties
      y[i] = 2.0 * std::abs(x[i]) + rng.normal();
      w[i] = 0.05 + rng.uniform();
    }
    const auto c = fit_shape(x, y, w, shape);
    CHECK(satisfies_shape(c, 1e-9));
    const auto pooled = oracle::pool_ties(x, y, w);
    const auto o = oracle::qp_barrier(pooled.x, pooled.y, pooled.w, shape);
    const double ours = weighted_sse(c, x, y, w);
    const double ref = oracle::sse_at_points(pooled, o, x, y, w);
    INFO("shape " << shape_name(shape) << " ours " << ours << " oracle " << ref);
    CHECK(ours <= ref + 1e-6);
    CHECK(ref <= ours + 1e-4);  // the oracle itself is accurate
  }
}

TEST_CASE("fit_shape is idempotent on its own output") {
  Rng rng(4);
  for (Shape shape : kAllShapes) {
    const std::size_t n = 40;
    std::vector<double> x(n), y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal() + x[i] * x[i];
      w[i] = 0.1 + rng.uniform();
    }
    const auto c = fit_shape(x, y, w, shape);
    const auto again = fit_shape(x, values_at(c, x), w, shape);
    const auto v1 = values_at(c, x), v2 = values_at(again, x);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(v1[i] - v2[i]) <= 1e-10);
  }
}

TEST_CASE("curvature fits have ordered slopes with the right sign") {
  Rng rng(9);
  for (Shape shape : kAllShapes) {
    if (!has_curvature(shape)) continue;
    std::vector<double> x(30), y(30), w(30, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = static_cast<double>(i) + rng.uniform() * 0.5;
      y[i] = 3.0 * rng.normal();
    }
    const auto c = fit_shape(x, y, w, shape);
    std::vector<double> slopes;
    for (std::size_t k = 0; k + 1 < c.knots.size(); ++k)
      slopes.push_back((c.values[k + 1] - c.values[k]) / (c.knots[k + 1] - c.knots[k]));
    const bool convex = curvature_part(shape) == Curvature::Convex;
    for (std::size_t k = 0; k + 1 < slopes.size(); ++k)
      CHECK((convex ? slopes[k + 1] - slopes[k] : slopes[k] - slopes[k + 1]) >= -1e-9);
    if (auto dir = monotone_part(shape))
      for (double s : slopes) CHECK((*dir == Direction::Increasing ? s : -s) >= -1e-9);
  }
}

TEST_CASE("ShapeProjector warm starts give the same answer as cold solves") {
  Rng rng(31);
  std::vector<double> x(80);
  for (auto& v : x) v = rng.normal();
  for (Shape shape : kAllShapes) {
    ShapeProjector proj(x, shape);
    for (int round = 0; round < 5; ++round) {
      std::vector<double> y(x.size()), w(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] * x[i] + 0.3 * rng.normal() + 0.1 * round;
        w[i] = 0.1 + rng.uniform();
      }
      const auto warm = proj.project(y, w);
      const auto cold = fit_shape(x, y, w, shape);
      REQUIRE(warm.size() == proj.knots().size());
      for (std::size_t k = 0; k < warm.size(); ++k) CHECK(std::abs(warm[k] - cold.values[k]) <= 1e-8);
    }
  }
}

TEST_CASE("eval_component interpolation and extrapolation") {
  AdditiveComponent c{{0, 1}, {0, 2}, Shape::Increasing};
  CHECK(eval_component(c, 0.5) == doctest::Approx(1.0));
  CHECK(eval_component(c, -5) == 0.0);
  CHECK(eval_component(c, 7) == 2.0);
  CHECK(eval_component(c, 1.0) == 2.0);
  AdditiveComponent v{{0, 1, 2}, {0, 0, 1}, Shape::Convex};
  CHECK(eval_component(v, 3) == doctest::Approx(2.0));
  CHECK(eval_component(v, -1) == doctest::Approx(0.0));
  CHECK(c(0.25) == doctest::Approx(0.5));
  AdditiveComponent single{{1.5}, {0.7}, Shape::Convex};
  CHECK(eval_component(single, -3) == doctest::Approx(0.7));
}
