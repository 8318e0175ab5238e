#pragma once

// Fisher information per unit experimental cost, with and without a
// postselection stage in front of the expensive final measurement.

#include <cmath>
#include <string>

#include "psmet/error.hpp"

namespace psmet {

struct CostModel {
  double c_prepare = 1.0;     // per trial
  double c_measure = 1.0;     // per final measurement
  double c_postselect = 0.0;  // per trial
  long long trials = 1;
};

inline void validate(const CostModel& c) {
  if (!std::isfinite(c.c_prepare) || !(c.c_prepare > 0.0))
    fail(ErrorKind::InvalidCost, "preparation cost must be positive and finite");
  if (!std::isfinite(c.c_measure) || !(c.c_measure > 0.0))
    fail(ErrorKind::InvalidCost, "measurement cost must be positive and finite");
  if (!std::isfinite(c.c_postselect) || c.c_postselect < 0.0)
    fail(ErrorKind::InvalidCost, "postselection cost must be nonnegative and finite");
  if (c.trials < 1) fail(ErrorKind::InvalidCost, "trials must be >= 1");
}

/// R = N I / (N C_P + N C_M); N cancels.
inline double rate(double fisher, const CostModel& costs) {
  validate(costs);
  if (!(fisher >= 0.0) || !std::isfinite(fisher))
    fail(ErrorKind::InvalidArgument, "Fisher information must be finite and nonnegative");
  return fisher / (costs.c_prepare + costs.c_measure);
}

/// R^ps = N p I^ps / (N C_P + N C_ps + N p C_M)
inline double ps_rate(double fisher_ps, double p_ps, const CostModel& costs) {
  validate(costs);
  if (!(p_ps > 0.0 && p_ps <= 1.0))
    fail(ErrorKind::InvalidProbability, "p_ps must lie in (0, 1], got " + std::to_string(p_ps));
  if (!(fisher_ps >= 0.0) || !std::isfinite(fisher_ps))
    fail(ErrorKind::InvalidArgument, "Fisher information must be finite and nonnegative");
  return p_ps * fisher_ps / (costs.c_prepare + costs.c_postselect + p_ps * costs.c_measure);
}

/// C_ps < (1 - p_ps) C_M
inline bool breakeven(double p_ps, const CostModel& costs) {
  validate(costs);
  if (!(p_ps >= 0.0 && p_ps <= 1.0))
    fail(ErrorKind::InvalidProbability, "p_ps must lie in [0, 1], got " + std::to_string(p_ps));
  return costs.c_postselect < (1.0 - p_ps) * costs.c_measure;
}

}  // namespace psmet
