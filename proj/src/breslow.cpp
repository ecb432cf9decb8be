#include "shapecox/breslow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shapecox {

CumulativeHazard breslow_hazard(const Dataset& ds, ConstVectorRef r) {
  if (r.size() != ds.size() || !r.allFinite())
    throw std::invalid_argument("breslow_hazard: linear predictor must be finite and match the dataset");
  const Index n = ds.size();
  const auto order = ds.order();
  // (1/n) / S_0n(Y_j) = exp(-log R_j) with R_j the risk-set sum.
  const Eigen::VectorXd log_risk = log_risk_sums(ds, r);

  CumulativeHazard h;
  double running = 0.0;
  for (Index s = 0; s < n;) {
    const Index last = ds.tie_last(s);
    double jump = 0.0;
    for (Index k = s; k <= last; ++k)
      if (ds.status()(order[static_cast<std::size_t>(k)])) jump += std::exp(-log_risk(k));
    if (jump > 0.0) {
      running += jump;
      h.times.push_back(ds.time()(order[static_cast<std::size_t>(s)]));
      h.increments.push_back(jump);
      h.cumulative.push_back(running);
    }
    s = last + 1;
  }
  return h;
}

double eval_hazard(const CumulativeHazard& h, double y) {
  const auto it = std::upper_bound(h.times.begin(), h.times.end(), y);
  if (it == h.times.begin()) return 0.0;
  return h.cumulative[static_cast<std::size_t>(it - h.times.begin()) - 1];
}

double baseline_survival(const CumulativeHazard& h, double y) { return std::exp(-eval_hazard(h, y)); }

}  // namespace shapecox
