#include "shapecox/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "shapecox/baselines.hpp"
#include "shapecox/errors.hpp"
#include "shapecox/parallel.hpp"
#include "shapecox/variance_inference.hpp"

namespace shapecox {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::optional<double> estimate_beta(Estimator e, const Dataset& ds, const Scenario& sc, const FitOptions& fit) {
  if (e == Estimator::Smple) {
    const Shape shape = sc.shape_for_fit();
    const auto m = fit_smple(ds, std::span<const Shape>(&shape, 1), fit);
    return m.beta(0);
  }
  const auto cols = all_columns(ds);
  return fit_tcr(ds, cols, fit).beta(0);
}

}  // namespace

double Scenario::g0(double z) const {
  switch (id) {
    case ScenarioId::I:
      return -2.0 * z;
    case ScenarioId::II:
      return -0.5 * std::abs(z * z * z);
    case ScenarioId::III:
      return 2.0 * std::abs(z);
  }
  return 0.0;
}

Shape Scenario::shape_for_fit() const { return id == ScenarioId::II ? Shape::Concave : Shape::Convex; }

ScenarioId parse_scenario(std::string_view name) {
  if (name == "I" || name == "1") return ScenarioId::I;
  if (name == "II" || name == "2") return ScenarioId::II;
  if (name == "III" || name == "3") return ScenarioId::III;
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'; valid scenarios: I, II, III");
}

std::string_view scenario_name(ScenarioId id) {
  switch (id) {
    case ScenarioId::I:
      return "I";
    case ScenarioId::II:
      return "II";
    case ScenarioId::III:
      return "III";
  }
  return "?";
}

std::string_view estimator_name(Estimator e) { return e == Estimator::Smple ? "SMPLE" : "TCR"; }

Observation draw_observation(const Scenario& sc, Rng& rng) {
  Observation o;
  const double x = rng.normal();
  const double z = rng.normal();
  const double rate = std::exp(sc.beta0 * x + sc.g0(z));
  const double t = -std::log(rng.uniform_open()) / rate;
  const double c = rng.uniform(0.0, sc.c);
  o.y = std::min(t, c);
  o.delta = t <= c ? 1 : 0;
  o.x = {x};
  o.z = {z};
  return o;
}

Dataset generate(const Scenario& sc, Rng& rng) {
  if (sc.n < 1 || !(sc.c > 0.0)) throw std::invalid_argument("generate: invalid scenario");
  std::vector<Observation> rows;
  rows.reserve(static_cast<std::size_t>(sc.n));
  for (Index i = 0; i < sc.n; ++i) rows.push_back(draw_observation(sc, rng));
  return Dataset::from_observations(rows);
}

Dataset generate(const Scenario& sc, std::uint64_t seed) {
  Rng rng(seed);
  return generate(sc, rng);
}

RepSummary run_study(const Scenario& sc, const StudyOptions& opts) {
  if (opts.n_reps < 2) throw std::invalid_argument("reps ≥ 2 required");
  if (opts.estimators.empty()) throw std::invalid_argument("run_study: no estimators selected");
  const std::size_t ne = opts.estimators.size();

  std::vector<ReplicationRecord> records(static_cast<std::size_t>(opts.n_reps));
  parallel_for(records.size(), resolve_threads(opts.threads), [&](std::size_t rep) {
    Rng rng = Rng::stream(opts.seed, rep);
    const Dataset ds = generate(sc, rng);
    const std::uint64_t split_seed = rng.next();
    ReplicationRecord& rec = records[rep];
    rec.rep = static_cast<int>(rep);
    rec.censoring = 1.0 - static_cast<double>(ds.num_events()) / static_cast<double>(ds.size());
    rec.estimates.resize(ne);
    for (std::size_t k = 0; k < ne; ++k) {
      const Estimator e = opts.estimators[k];
      EstimatorRecord& er = rec.estimates[k];
      try {
        if (e == Estimator::Smple && opts.distance) {
          const Shape shape = sc.shape_for_fit();
          const auto m = fit_smple(ds, std::span<const Shape>(&shape, 1), opts.fit);
          er.beta = m.beta(0);
          rec.distance = distance_d(m, sc, opts.mc_points, split_seed ^ 0x5DEECE66DULL);
        } else {
          er.beta = *estimate_beta(e, ds, sc, opts.fit);
        }
        er.ok = true;
      } catch (const std::exception&) {
        er.ok = false;
        continue;
      }
      if (!opts.coverage) continue;
      try {
        SubsampleEstimator block = [&](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
          const Dataset sub = ds.subset(rows);
          Eigen::VectorXd v(1);
          v(0) = *estimate_beta(e, sub, sc, opts.fit);
          return v;
        };
        SplitOptions so;
        so.alpha_tilde = opts.alpha_tilde;
        so.repeats = opts.repeats;
        so.seed = split_seed + k;
        so.threads = 1;
        const SplitVariance sv = split_variance(ds.size(), block, so);
        Eigen::VectorXd theta(1);
        theta(0) = er.beta;
        const auto [lo, hi] = wald_interval(theta, sv, opts.level, 0);
        er.low = lo;
        er.high = hi;
        er.sigma = std::sqrt(sv.sigma_hat(0, 0));
        er.ci_ok = true;
      } catch (const std::exception&) {
        er.ci_ok = false;
      }
    }
  });

  RepSummary summary;
  summary.scenario = sc;
  summary.n_reps = opts.n_reps;
  summary.seed = opts.seed;
  double cens = 0.0;
  std::vector<double> distances;
  for (const auto& rec : records) {
    cens += rec.censoring;
    if (opts.distance && !rec.estimates.empty()) distances.push_back(rec.distance);
  }
  summary.censoring = cens / static_cast<double>(records.size());
  summary.median_distance = median(distances);

  for (std::size_t k = 0; k < ne; ++k) {
    EstimatorSummary es;
    es.estimator = opts.estimators[k];
    double sum = 0.0, sq = 0.0, len = 0.0;
    int covered = 0;
    std::vector<double> abs_err;
    for (const auto& rec : records) {
      const auto& er = rec.estimates[k];
      if (!er.ok) {
        ++es.dropped;
        continue;
      }
      ++es.n_ok;
      const double err = er.beta - sc.beta0;
      sum += err;
      sq += err * err;
      abs_err.push_back(std::abs(err));
      if (er.ci_ok) {
        ++es.n_ci;
        len += er.high - er.low;
        if (er.low <= sc.beta0 && sc.beta0 <= er.high) ++covered;
      }
    }
    if (es.dropped > opts.n_reps / 20)
      throw FitError(std::string(estimator_name(es.estimator)) + " failed in " + std::to_string(es.dropped) + " of " +
                     std::to_string(opts.n_reps) + " replications (more than 5%)");
    if (es.n_ok > 0) {
      es.rmse_x100 = 100.0 * std::sqrt(sq / es.n_ok);
      es.bias_x100 = 100.0 * std::abs(sum / es.n_ok);
      es.median_abs_error = median(abs_err);
    }
    if (es.n_ci > 0) {
      es.coverage = static_cast<double>(covered) / es.n_ci;
      es.avg_length = len / es.n_ci;
    }
    summary.estimators.push_back(es);
  }
  summary.records = std::move(records);
  return summary;
}

double distance_d(const std::function<double(double, double)>& predictor, const Scenario& sc, int mc_points,
                  std::uint64_t seed) {
  if (mc_points < 2) throw std::invalid_argument("distance_d: mc_points must be >= 2");
  Rng rng(seed);
  std::vector<double> diff(static_cast<std::size_t>(mc_points));
  std::vector<int> event(diff.size());
  double event_sum = 0.0, events = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    const Observation o = draw_observation(sc, rng);
    const double x = o.x[0], z = o.z[0];
    diff[i] = predictor(x, z) - (sc.beta0 * x + sc.g0(z));
    event[i] = o.delta;
    if (o.delta) {
      event_sum += diff[i];
      events += 1.0;
    }
  }
  const double offset = events > 0.0 ? event_sum / events : 0.0;
  double s = 0.0;
  for (double v : diff) s += (v - offset) * (v - offset);
  return std::sqrt(s / static_cast<double>(diff.size()));
}

double distance_d(const FittedModel& m, const Scenario& sc, int mc_points, std::uint64_t seed) {
  if (m.beta.size() != 1 || m.components.size() != 1)
    throw std::invalid_argument("distance_d: model dimensions do not match the scenario");
  return distance_d([&m](double x, double z) { return m.beta(0) * x + eval_component(m.components[0], z); }, sc,
                    mc_points, seed);
}

std::vector<std::pair<double, double>> qq_points(std::span<const double> estimates) {
  if (estimates.empty()) throw std::invalid_argument("qq_points: no estimates");
  std::vector<double> sorted(estimates.begin(), estimates.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    out.emplace_back(sorted[i], normal_quantile((static_cast<double>(i) + 0.5) / n));
  return out;
}

void qq_export(std::span<const double> estimates, const std::filesystem::path& path) {
  const auto pts = qq_points(estimates);
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "empirical,normal\n";
  char buf[80];
  for (const auto& [e, q] : pts) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", e, q);
    out << buf;
  }
  if (!out) throw Error("failed while writing '" + path.string() + "'");
}

}  // namespace shapecox
