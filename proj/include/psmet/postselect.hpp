#pragma once

// Projective postselection of an evolved state and the Fisher information
// carried by the renormalized survivors.

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "psmet/fisher.hpp"
#include "psmet/qcore.hpp"

namespace psmet {

inline constexpr double kPostselectionFloor = 1e-12;

/// Projector F together with an orthonormal set {|f>} spanning its range.
class Postselection {
 public:
  /// From orthonormal columns |f>; F = sum_f |f><f|.
  static Postselection from_basis(const CMatrix& basis) {
    detail::check_dim(basis.rows());
    if (basis.cols() < 1 || basis.cols() > basis.rows())
      fail(ErrorKind::InvalidArgument, "postselection basis must have 1..dim columns");
    const double dev = detail::max_abs(basis.adjoint() * basis -
                                       CMatrix::Identity(basis.cols(), basis.cols()));
    if (dev > 1e-10) fail(ErrorKind::NotProjector, "postselection basis is not orthonormal");
    return Postselection(Operator::projector_onto(basis), basis);
  }

  static Postselection from_states(const std::vector<StateVector>& states) {
    if (states.empty()) fail(ErrorKind::InvalidArgument, "empty postselection set");
    CMatrix basis(states.front().dim(), Index(states.size()));
    for (std::size_t j = 0; j < states.size(); ++j) {
      detail::require_same_dim(states[j].dim(), basis.rows(), "postselection states");
      basis.col(Index(j)) = states[j].amplitudes();
    }
    return from_basis(basis);
  }

  /// From a projector; the spanning set is its eigenvalue-1 eigenvectors.
  static Postselection from_projector(const Operator& f) {
    const Operator proj = f.as(OperatorKind::projector);
    const Eigensystem es = eig_hermitian(proj);
    std::vector<Index> cols;
    for (Index j = 0; j < es.dim(); ++j)
      if (es.values[j] > 0.5) cols.push_back(j);
    if (cols.empty()) fail(ErrorKind::VanishingPostselection, "postselection projector is zero");
    CMatrix basis(es.dim(), Index(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) basis.col(Index(j)) = es.vectors.col(cols[j]);
    return Postselection(proj, std::move(basis));
  }

  const Operator& projector() const noexcept { return f_; }
  const CMatrix& basis() const noexcept { return basis_; }
  Index dim() const noexcept { return f_.dim(); }
  Index rank() const noexcept { return basis_.cols(); }

 private:
  Postselection(Operator f, CMatrix basis) : f_(std::move(f)), basis_(std::move(basis)) {}

  Operator f_;
  CMatrix basis_;
};

class PostselectedOutcome {
 public:
  PostselectedOutcome(double p_ps, StateVector raw) : p_ps_(p_ps), raw_(std::move(raw)) {
    if (p_ps_ > kPostselectionFloor)
      state_ = StateVector::normalize(raw_.amplitudes());
  }

  double p_ps() const noexcept { return p_ps_; }
  const StateVector& raw_state() const noexcept { return raw_; }
  bool has_state() const noexcept { return state_.has_value(); }

  /// Renormalized survivor F|psi>/sqrt(p_ps).
  const StateVector& state() const {
    if (!state_)
      fail(ErrorKind::VanishingPostselection,
           "p_ps = " + std::to_string(p_ps_) + " is below the 1e-12 floor");
    return *state_;
  }

 private:
  double p_ps_;
  StateVector raw_;
  std::optional<StateVector> state_;
};

inline PostselectedOutcome apply_postselection(const StateVector& psi_theta, const Postselection& ps) {
  if (!psi_theta.is_normalized()) fail(ErrorKind::NotNormalized, "postselection input must be normalized");
  detail::require_same_dim(psi_theta.dim(), ps.dim(), "apply_postselection");
  CVector raw = ps.projector().matrix() * psi_theta.amplitudes();
  const double p = std::clamp(raw.squaredNorm(), 0.0, 1.0);
  return PostselectedOutcome(p, StateVector::unnormalized(std::move(raw)));
}

/// Tr(F rho)
inline double postselection_probability(const Operator& rho, const Postselection& ps) {
  detail::require_same_dim(rho.dim(), ps.dim(), "postselection_probability");
  return std::clamp((ps.projector().matrix() * rho.matrix()).trace().real(), 0.0, 1.0);
}

/// F rho F / Tr(F rho)
inline Operator postselect_density(const Operator& rho, const Postselection& ps) {
  const double p = postselection_probability(rho, ps);
  if (p <= kPostselectionFloor) fail(ErrorKind::VanishingPostselection, "Tr(F rho) below 1e-12");
  const CMatrix& f = ps.projector().matrix();
  return Operator(CMatrix(f * rho.matrix() * f / p), OperatorKind::density);
}

namespace detail {

inline void require_nondegenerate(const Operator& a) {
  if (spectral_range(a) <= 1e-12)
    fail(ErrorKind::DegenerateGenerator, "all generator eigenvalues coincide");
}

}  // namespace detail

/// Postselected QFI of the renormalized family F U(theta)|psi0> from the
/// trace forms
///   4/p Tr(F A rho A) - 4/p^2 |Tr(F rho A)|^2,  p = Tr(F rho), rho = rho_theta.
inline FisherReport postselected_qfi(const StateVector& psi0, const Operator& a,
                                     const Postselection& ps, double theta) {
  if (!psi0.is_normalized()) fail(ErrorKind::NotNormalized, "postselected_qfi needs a normalized state");
  detail::require_same_dim(psi0.dim(), a.dim(), "postselected_qfi");
  detail::require_same_dim(psi0.dim(), ps.dim(), "postselected_qfi");
  detail::require_nondegenerate(a);

  const Operator rho = evolve(Operator::pure(psi0), a, theta);
  const CMatrix& f = ps.projector().matrix();
  const CMatrix& am = a.matrix();
  const double p = (f * rho.matrix()).trace().real();
  if (p <= kPostselectionFloor)
    fail(ErrorKind::VanishingPostselection, "p_ps = " + std::to_string(p) + " (divergent)");

  const double first = 4.0 * (f * am * rho.matrix() * am).trace().real() / p;
  const double second = 4.0 * std::norm((f * rho.matrix() * am).trace()) / (p * p);
  return detail::make_report(first - second, FisherMethod::closed_form, first);
}

namespace detail {

inline CVector renormalized_survivor(const StateVector& psi0, const Eigensystem& a,
                                     const CMatrix& f, double theta) {
  const CVector raw = f * (unitary_matrix(a, theta) * psi0.amplitudes());
  const double p = raw.squaredNorm();
  if (p <= kPostselectionFloor)
    fail(ErrorKind::VanishingPostselection, "p_ps below 1e-12 on the difference stencil");
  return raw / std::sqrt(p);
}

}  // namespace detail

/// Independent route: central differences of the renormalized survivor state,
/// then the pure-state tangent formula.
inline FisherReport postselected_qfi_fd(const StateVector& psi0, const Operator& a,
                                        const Postselection& ps, double theta, double step) {
  if (!psi0.is_normalized()) fail(ErrorKind::NotNormalized, "postselected_qfi_fd needs a normalized state");
  if (!(step > 0.0)) fail(ErrorKind::InvalidArgument, "step must be positive");
  detail::require_same_dim(psi0.dim(), a.dim(), "postselected_qfi_fd");
  detail::require_same_dim(psi0.dim(), ps.dim(), "postselected_qfi_fd");

  const Eigensystem es = eig_hermitian(a);
  const CMatrix& f = ps.projector().matrix();
  const CVector center = detail::renormalized_survivor(psi0, es, f, theta);
  const CVector plus = detail::renormalized_survivor(psi0, es, f, theta + step);
  const CVector minus = detail::renormalized_survivor(psi0, es, f, theta - step);
  const CVector tangent = (plus - minus) / (2.0 * step);

  FisherReport r = qfi_pure_tangent(StateVector::normalize(center), StateVector::unnormalized(tangent));
  r.method = FisherMethod::finite_difference;
  r.step = step;
  return r;
}

/// Mixed-input convenience: SLD QFI of F rho_theta F / p with the analytic
/// derivative of the renormalized state.
inline FisherReport postselected_qfi_mixed(const Operator& rho0, const Operator& a,
                                           const Postselection& ps, double theta) {
  detail::require_same_dim(rho0.dim(), a.dim(), "postselected_qfi_mixed");
  detail::require_same_dim(rho0.dim(), ps.dim(), "postselected_qfi_mixed");
  const Operator rho = evolve(rho0, a, theta);
  const CMatrix& f = ps.projector().matrix();
  const double p = (f * rho.matrix()).trace().real();
  if (p <= kPostselectionFloor) fail(ErrorKind::VanishingPostselection, "Tr(F rho) below 1e-12");

  const CMatrix drho = generator_derivative(rho, a).matrix();
  const double dp = (f * drho).trace().real();
  const CMatrix frf = f * rho.matrix() * f;
  const CMatrix d_ps = f * drho * f / p - frf * (dp / (p * p));
  return qfi_mixed_sld(Operator(CMatrix(frf / p), OperatorKind::density),
                       Operator(d_ps, OperatorKind::hermitian));
}

}  // namespace psmet
