#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "psmet/qcore.hpp"

namespace psmet {

enum class FisherMethod { closed_form, sld, pure_state, finite_difference, quasiprobability };

constexpr std::string_view to_string(FisherMethod m) noexcept {
  switch (m) {
    case FisherMethod::closed_form: return "closed_form";
    case FisherMethod::sld: return "sld";
    case FisherMethod::pure_state: return "pure_state";
    case FisherMethod::finite_difference: return "finite_difference";
    case FisherMethod::quasiprobability: return "quasiprobability";
  }
  return "unknown";
}

/// A Fisher-information value together with how it was obtained.
struct FisherReport {
  double value = 0.0;
  FisherMethod method = FisherMethod::closed_form;
  std::optional<double> step;
  std::optional<Operator> sld_operator;
};

namespace detail {

// Rounding negatives down to -1e-9 (relative to the magnitude of the terms
// that were subtracted) are clamped to zero.
inline FisherReport make_report(double value, FisherMethod method, double term_scale = 1.0,
                                std::optional<double> step = std::nullopt) {
  if (!std::isfinite(value)) fail(ErrorKind::NonFinite, "Fisher information is not finite");
  if (value < 0.0) {
    if (value < -1e-9 * std::max(1.0, term_scale))
      fail(ErrorKind::NumericalFailure, "negative Fisher information " + std::to_string(value));
    value = 0.0;
  }
  return FisherReport{value, method, step, std::nullopt};
}

}  // namespace detail

inline double default_step(double theta) { return 1e-5 * std::max(1.0, std::abs(theta)); }

/// Outcome distribution p_i(theta). `prob` must be reentrant.
struct ClassicalModel {
  std::size_t outcome_count = 0;
  std::function<std::vector<double>(double)> prob;
};

namespace detail {

inline std::vector<double> checked_probabilities(const ClassicalModel& model, double theta) {
  std::vector<double> p = model.prob(theta);
  if (p.size() != model.outcome_count)
    fail(ErrorKind::NotAProbability, "model returned the wrong number of outcomes");
  double sum = 0.0;
  for (double& x : p) {
    if (!std::isfinite(x) || x < -1e-12) fail(ErrorKind::NotAProbability, "negative or non-finite probability");
    x = std::max(x, 0.0);
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-10)
    fail(ErrorKind::NotAProbability, "probabilities sum to " + std::to_string(sum));
  return p;
}

}  // namespace detail

/// sum_i (d p_i / d theta)^2 / p_i with central differences.
///
/// Outcomes with p_i < 1e-12 and a vanishing first derivative sit at a
/// quadratic zero of p_i; their contribution is the continuous limit
/// (p_i')^2 / p_i -> 2 p_i'', estimated from the second difference.
/// With `richardson`, first derivatives use the h, h/2 extrapolation.
inline FisherReport classical_fisher(const ClassicalModel& model, double theta, double step,
                                     bool richardson = false) {
  if (!(step > 0.0)) fail(ErrorKind::InvalidArgument, "step must be positive");
  const auto p0 = detail::checked_probabilities(model, theta);
  const auto pp = detail::checked_probabilities(model, theta + step);
  const auto pm = detail::checked_probabilities(model, theta - step);
  std::vector<double> pp2, pm2;
  if (richardson) {
    pp2 = detail::checked_probabilities(model, theta + step / 2);
    pm2 = detail::checked_probabilities(model, theta - step / 2);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < model.outcome_count; ++i) {
    double dp = (pp[i] - pm[i]) / (2 * step);
    if (richardson) {
      const double dp_half = (pp2[i] - pm2[i]) / step;
      dp = (4 * dp_half - dp) / 3;
    }
    if (p0[i] < 1e-12) {
      if (std::abs(dp) >= 1e-9)
        fail(ErrorKind::SingularOutcome,
             "outcome " + std::to_string(i) + " has vanishing probability but nonzero slope");
      const double curvature = (pp[i] - 2 * p0[i] + pm[i]) / (step * step);
      total += std::max(0.0, 2 * curvature);
      continue;
    }
    total += dp * dp / p0[i];
  }
  return detail::make_report(total, FisherMethod::finite_difference, 1.0, step);
}

/// Outcome probabilities of a projective measurement in the orthonormal
/// columns of `basis`, applied to exp(-i A theta) rho0 exp(i A theta).
inline ClassicalModel born_model(const Operator& rho0, const Operator& a, const CMatrix& basis) {
  detail::require_same_dim(rho0.dim(), a.dim(), "born_model");
  detail::require_same_dim(rho0.dim(), basis.rows(), "born_model basis");
  const Eigensystem es = eig_hermitian(a);
  // p_k = sum_j lambda_j |<b_k|U v_j>|^2 keeps small probabilities accurate to
  // relative precision, which the zero-probability limit in classical_fisher needs.
  const Eigensystem rho_es = eig_hermitian(rho0.as(OperatorKind::density));
  std::vector<std::pair<double, CVector>> terms;
  for (Index j = 0; j < rho_es.dim(); ++j)
    if (rho_es.values[j] > 0.0) terms.emplace_back(rho_es.values[j], rho_es.vectors.col(j));
  return ClassicalModel{
      static_cast<std::size_t>(basis.cols()), [es, terms, basis](double theta) {
        const CMatrix u = unitary_matrix(es, theta);
        std::vector<double> p(basis.cols(), 0.0);
        for (const auto& [weight, v] : terms) {
          const CVector amps = basis.adjoint() * (u * v);
          for (Index k = 0; k < basis.cols(); ++k) p[k] += weight * std::norm(amps[k]);
        }
        return p;
      }};
}

inline ClassicalModel born_model(const StateVector& psi0, const Operator& a, const CMatrix& basis) {
  return born_model(Operator::pure(psi0), a, basis);
}

/// 4 Var(A) in the input state; the pure-state QFI of exp(-i A theta)|psi0>.
inline FisherReport qfi_pure_generator(const StateVector& psi0, const Operator& a) {
  if (!psi0.is_normalized()) fail(ErrorKind::NotNormalized, "qfi_pure_generator needs a normalized state");
  detail::require_same_dim(psi0.dim(), a.dim(), "qfi_pure_generator");
  return detail::make_report(4.0 * variance(psi0, a), FisherMethod::pure_state);
}

/// 4 <dpsi|dpsi> - 4 |<dpsi|psi>|^2
inline FisherReport qfi_pure_tangent(const StateVector& psi, const StateVector& dpsi) {
  detail::require_same_dim(psi.dim(), dpsi.dim(), "qfi_pure_tangent");
  const double overlap = std::norm(dpsi.amplitudes().dot(psi.amplitudes()));
  const double first = 4.0 * dpsi.norm_squared();
  return detail::make_report(first - 4.0 * overlap, FisherMethod::pure_state, first);
}

/// -i [A, rho]: the theta-derivative of U rho U^dagger at the current rho.
inline Operator generator_derivative(const Operator& rho, const Operator& a) {
  detail::require_same_dim(rho.dim(), a.dim(), "generator_derivative");
  const Complex minus_i(0.0, -1.0);
  const CMatrix comm = a.matrix() * rho.matrix() - rho.matrix() * a.matrix();
  return Operator(CMatrix(minus_i * comm), OperatorKind::hermitian);
}

/// Tr(rho L^2) with the symmetric logarithmic derivative L solving
/// d rho = (L rho + rho L) / 2. Kernel entries with lambda_j + lambda_k <= 1e-12
/// are set to zero.
inline FisherReport qfi_mixed_sld(const Operator& rho, const Operator& drho) {
  detail::require_same_dim(rho.dim(), drho.dim(), "qfi_mixed_sld");
  const Operator d_rho = drho.as(OperatorKind::hermitian);
  const double tr = d_rho.trace().real();
  if (std::abs(tr) > 1e-9) fail(ErrorKind::NotTraceless, "Tr(d rho) = " + std::to_string(tr));
  const Operator state = rho.as(OperatorKind::density);

  const Eigensystem es = eig_hermitian(state);
  const CMatrix d_eig = es.vectors.adjoint() * d_rho.matrix() * es.vectors;
  const Index n = es.dim();
  CMatrix l_eig = CMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < n; ++k) {
      const double denom = std::max(es.values[j], 0.0) + std::max(es.values[k], 0.0);
      if (denom > 1e-12) l_eig(j, k) = 2.0 * d_eig(j, k) / denom;
    }
  const CMatrix sld = es.vectors * l_eig * es.vectors.adjoint();
  const double value = (state.matrix() * sld * sld).trace().real();

  FisherReport report = detail::make_report(value, FisherMethod::sld);
  report.sld_operator = Operator(sld, OperatorKind::hermitian);
  return report;
}

struct MaxQfi {
  double value;
  StateVector optimal_state;
};

/// (Delta a)^2, attained by (|a_min> + |a_max>)/sqrt(2).
inline MaxQfi max_qfi(const Operator& a) {
  const Eigensystem es = eig_hermitian(a);
  const Index n = es.dim();
  const double range = es.values[n - 1] - es.values[0];
  if (range <= 1e-12)
    fail(ErrorKind::DegenerateGenerator, "all generator eigenvalues coincide; theta is not imprinted");
  const CVector opt = (es.vectors.col(0) + es.vectors.col(n - 1)) / std::sqrt(2.0);
  return MaxQfi{range * range, StateVector::normalize(opt)};
}

/// 1 / (trials * I)
inline double cramer_rao_bound(double fisher_value, long long trials) {
  if (!(fisher_value > 0.0) || !std::isfinite(fisher_value))
    fail(ErrorKind::NonpositiveInformation, "Fisher information must be positive");
  if (trials < 1) fail(ErrorKind::InvalidArgument, "trials must be >= 1");
  return 1.0 / (static_cast<double>(trials) * fisher_value);
}

}  // namespace psmet
