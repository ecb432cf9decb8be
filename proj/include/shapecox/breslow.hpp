#pragma once

#include <vector>

#include "shapecox/partial_likelihood.hpp"
#include "shapecox/survival_core.hpp"

namespace shapecox {

// Right-continuous step function with jumps at the distinct event times.
struct CumulativeHazard {
  std::vector<double> times;
  std::vector<double> increments;
  std::vector<double> cumulative;
};

// Breslow-type estimator: jump (1/n) / S_0n(Y_j) at every event j. Tied
// event times are merged into one jump carrying the sum of their increments.
CumulativeHazard breslow_hazard(const Dataset& ds, ConstVectorRef r);

// Value at y; a jump at exactly y is included.
double eval_hazard(const CumulativeHazard& h, double y);

// exp(-Lambda(y)).
double baseline_survival(const CumulativeHazard& h, double y);

}  // namespace shapecox
