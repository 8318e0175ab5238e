#pragma once

// Randomized checks of the two bounds relating postselected Fisher
// information to the conditional KD distribution:
//   commuting A, F    => I_ps <= (Delta a)^2 and the distribution is classical;
//   I_ps > (Delta a)^2 => some conditional quasiprobability has negative real part.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "psmet/kdq.hpp"
#include "psmet/postselect.hpp"
#include "psmet/qcore.hpp"

namespace psmet {

inline constexpr double kBoundSlack = 1e-8;    // absolute, on I_ps - (Delta a)^2
inline constexpr double kAnomalyMargin = 1e-6;  // relative, to call I_ps anomalous

struct TrialResult {
  double qfi_ps = 0.0;
  double delta_a2 = 0.0;
  double p_ps = 0.0;
  NegativityReport negativity;

  double ratio() const { return qfi_ps / delta_a2; }
  bool anomalous() const { return qfi_ps > delta_a2 * (1.0 + kAnomalyMargin); }
};

/// Postselected QFI at theta and the conditional KD scan of rho_theta.
inline TrialResult evaluate_trial(const StateVector& psi0, const Operator& a, const Postselection& ps,
                                  double theta) {
  TrialResult t;
  const double range = spectral_range(a);
  t.delta_a2 = range * range;
  t.qfi_ps = postselected_qfi(psi0, a, ps, theta).value;
  const Operator rho = evolve(Operator::pure(psi0), a, theta);
  const KDTensor kd = kd_for_postselection(rho, a, ps);
  const ConditionalKD cond = conditional_kd(kd, postselected_indices(kd));
  t.p_ps = cond.p_ps;
  t.negativity = negativity(cond);
  return t;
}

struct TheoremSummary {
  int theorem = 1;
  Index dim = 0;
  long long trials = 0;
  long long evaluated = 0;
  long long skipped = 0;  // p_ps below the floor
  long long anomalies = 0;
  long long violations = 0;
  double max_ratio = 0.0;
  double max_min_real_of_anomalies = -std::numeric_limits<double>::infinity();
  double worst_classical_min_real = std::numeric_limits<double>::infinity();
  double worst_classical_imag = 0.0;
};

/// Theorem 1: commuting instances; a violation is I_ps > (Delta a)^2 + 1e-8 or
/// a nonclassical conditional distribution.
/// Theorem 2: noncommuting instances; a violation is an anomalous I_ps with
/// min Re q >= 0.
inline TheoremSummary theorem_check(int theorem, long long trials, Index dim, std::uint64_t seed) {
  if (theorem != 1 && theorem != 2) fail(ErrorKind::InvalidArgument, "theorem must be 1 or 2");
  if (trials < 1) fail(ErrorKind::InvalidArgument, "trials must be >= 1");
  if (dim < 2 || dim > kMaxDim) fail(ErrorKind::InvalidDim, "dim must lie in [2, 64]");

  TheoremSummary s;
  s.theorem = theorem;
  s.dim = dim;
  s.trials = trials;
  std::mt19937_64 seeds(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (long long i = 0; i < trials; ++i) {
    const std::uint64_t instance_seed = seeds();
    const double theta = angle(seeds);
    const RandomInstance inst = random_instance(dim, instance_seed, theorem == 1);
    TrialResult t;
    try {
      t = evaluate_trial(inst.psi0, inst.A, Postselection::from_basis(inst.f_basis), theta);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::VanishingPostselection) throw;
      ++s.skipped;
      continue;
    }
    ++s.evaluated;
    s.max_ratio = std::max(s.max_ratio, t.ratio());
    if (t.anomalous()) {
      ++s.anomalies;
      s.max_min_real_of_anomalies = std::max(s.max_min_real_of_anomalies, t.negativity.min_real);
    }
    if (theorem == 1) {
      s.worst_classical_min_real = std::min(s.worst_classical_min_real, t.negativity.min_real);
      s.worst_classical_imag = std::max(s.worst_classical_imag, t.negativity.max_imag_abs);
      if (t.qfi_ps > t.delta_a2 + kBoundSlack || !t.negativity.is_classical) ++s.violations;
    } else if (t.anomalous() && !(t.negativity.min_real < 0.0)) {
      ++s.violations;
    }
  }
  return s;
}

}  // namespace psmet
