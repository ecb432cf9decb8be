#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shapecox/rng.hpp"
#include "shapecox/shape_solvers.hpp"
#include "shapecox/smple_fit.hpp"
#include "shapecox/survival_core.hpp"

namespace shapecox {

// Simulation design: X, Z iid N(0,1); T | X, Z exponential with rate
// exp(beta0 X + g0(Z)); C uniform on (0, c).
//   I:   g0(z) = -2z,         fitted as convex
//   II:  g0(z) = -|z|^3 / 2,  fitted as concave
//   III: g0(z) = 2|z|,        fitted as convex
enum class ScenarioId { I = 1, II = 2, III = 3 };

struct Scenario {
  ScenarioId id = ScenarioId::I;
  double beta0 = -2.0;
  double c = 5.0;
  Index n = 600;

  double g0(double z) const;
  Shape shape_for_fit() const;
};

ScenarioId parse_scenario(std::string_view name);
std::string_view scenario_name(ScenarioId id);

// One subject drawn from the scenario.
Observation draw_observation(const Scenario& sc, Rng& rng);
Dataset generate(const Scenario& sc, Rng& rng);
Dataset generate(const Scenario& sc, std::uint64_t seed);

enum class Estimator { Smple, Tcr };
std::string_view estimator_name(Estimator e);

struct StudyOptions {
  std::vector<Estimator> estimators{Estimator::Smple, Estimator::Tcr};
  int n_reps = 200;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: SHAPECOX_THREADS or hardware concurrency
  bool coverage = false;
  double alpha_tilde = 0.35;
  int repeats = 20;
  double level = 0.95;
  bool distance = false;
  int mc_points = 4000;
  FitOptions fit;
};

struct EstimatorRecord {
  bool ok = false;
  double beta = 0.0;
  bool ci_ok = false;
  double sigma = 0.0;  // sqrt of the split variance estimate
  double low = 0.0;
  double high = 0.0;
};

struct ReplicationRecord {
  int rep = 0;
  double censoring = 0.0;
  std::vector<EstimatorRecord> estimates;  // parallel to StudyOptions::estimators
  double distance = 0.0;                   // SMPLE only, when requested
};

struct EstimatorSummary {
  Estimator estimator = Estimator::Smple;
  int n_ok = 0;
  int dropped = 0;
  double rmse_x100 = 0.0;
  double bias_x100 = 0.0;
  double median_abs_error = 0.0;
  int n_ci = 0;
  double coverage = 0.0;
  double avg_length = 0.0;
};

struct RepSummary {
  Scenario scenario;
  int n_reps = 0;
  std::uint64_t seed = 0;
  double censoring = 0.0;  // mean censoring proportion
  double median_distance = 0.0;
  std::vector<EstimatorSummary> estimators;
  std::vector<ReplicationRecord> records;
};

// Replications run in parallel; replication r draws its data from stream r
// of the seed, and summaries are formed from the collected records, so the
// result does not depend on the worker count. Throws FitError when more than
// 5% of replications fail for some estimator.
RepSummary run_study(const Scenario& sc, const StudyOptions& opts);

// Monte Carlo L2 distance between a fitted predictor and the true one over
// fresh draws of (X, Z). Both predictors are compared after removing their
// event-weighted means, since the linear predictor is only identified up to
// an additive constant.
double distance_d(const std::function<double(double x, double z)>& predictor, const Scenario& sc, int mc_points,
                  std::uint64_t seed);
double distance_d(const FittedModel& m, const Scenario& sc, int mc_points, std::uint64_t seed);

// (empirical quantile, standard normal quantile) pairs, sorted by the first.
std::vector<std::pair<double, double>> qq_points(std::span<const double> estimates);
void qq_export(std::span<const double> estimates, const std::filesystem::path& path);

}  // namespace shapecox
