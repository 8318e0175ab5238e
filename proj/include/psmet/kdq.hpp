#pragma once

// Doubly extended Kirkwood-Dirac quasiprobabilities
//   q(a, a', f) = <f|a><a|rho|a'><a'|f>
// over an eigenbasis {|a>} of the generator and a basis {|f>} diagonalizing
// the postselection, plus the Fisher information expressed through them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "psmet/fisher.hpp"
#include "psmet/postselect.hpp"
#include "psmet/qcore.hpp"

namespace psmet {

struct KDTensor {
  Index dim = 0;
  std::vector<Complex> values;  // row-major over (a, a', f)
  CMatrix basis_a;              // columns |a>, shared by both a and a' axes
  CMatrix basis_f;              // columns |f>
  RVector eigs_a;
  RVector eigs_f;               // F eigenvalue carried by each |f>
  bool perturbed = false;       // basis_f was rotated away from singular overlaps

  std::size_t offset(Index a, Index ap, Index f) const {
    return static_cast<std::size_t>((a * dim + ap) * dim + f);
  }
  Complex at(Index a, Index ap, Index f) const { return values[offset(a, ap, f)]; }
};

using IndexSet = std::vector<Index>;

struct KdOptions {
  /// Rotate {|f>} by a small random unitary when some <f|a> vanishes, so the
  /// tensor stays invertible for reconstruct_rho.
  bool perturb_singular = false;
  std::uint64_t seed = 0x5eed;
  double angle = 1e-7;
  int attempts = 3;
};

inline constexpr double kOverlapFloor = 1e-12;
inline constexpr double kClassicalTol = 1e-10;

namespace detail {

inline double min_abs_overlap(const CMatrix& basis_f, const CMatrix& basis_a) {
  return (basis_f.adjoint() * basis_a).cwiseAbs().minCoeff();
}

inline CMatrix perturb_basis(const CMatrix& basis, double angle, Rng& rng) {
  const Operator h = random_hermitian(basis.rows(), rng);
  Eigensystem es = eig_hermitian(h);
  es.values /= std::max(es.values.cwiseAbs().maxCoeff(), 1e-300);
  return unitary_matrix(es, -angle) * basis;  // exp(+i angle H)
}

struct KdBases {
  Eigensystem a;
  CMatrix f_basis;
  RVector f_values;
};

inline bool commutes(const Operator& a, const Operator& f) {
  const double scale = std::max(1.0, max_abs(a.matrix())) * std::max(1.0, max_abs(f.matrix()));
  return commutator_norm(a, f) <= 1e-9 * scale;
}

// {|a>} is A's eigenbasis refined by F inside degenerate A blocks. If [A, F] = 0
// the same vectors serve as {|f>}, which is the shared eigenbasis; otherwise
// {|f>} is F's eigenbasis refined by A inside degenerate F blocks.
inline KdBases select_bases(const Operator& a, const Operator& f) {
  require_same_dim(a.dim(), f.dim(), "kd bases");
  Eigensystem a_sys = refine_degenerate_blocks(eig_hermitian(a), f.matrix());
  if (commutes(a, f)) {
    RVector fv(a.dim());
    for (Index j = 0; j < a.dim(); ++j)
      fv[j] = std::real(a_sys.vectors.col(j).dot(f.matrix() * a_sys.vectors.col(j)));
    CMatrix fb = a_sys.vectors;
    return KdBases{std::move(a_sys), std::move(fb), std::move(fv)};
  }
  const Eigensystem f_sys = refine_degenerate_blocks(eig_hermitian(f), a.matrix());
  return KdBases{std::move(a_sys), f_sys.vectors, f_sys.values};
}

}  // namespace detail

/// Tensor over explicit bases. `basis_a` columns are eigenvectors of the
/// generator with eigenvalues `eigs_a`.
inline KDTensor kd_from_bases(const Operator& rho, const CMatrix& basis_a, const RVector& eigs_a,
                              const CMatrix& basis_f, const RVector& eigs_f, const KdOptions& opts = {}) {
  const Index d = rho.dim();
  detail::require_same_dim(d, basis_a.rows(), "kd basis_a");
  detail::require_same_dim(d, basis_a.cols(), "kd basis_a");
  detail::require_same_dim(d, basis_f.rows(), "kd basis_f");
  detail::require_same_dim(d, basis_f.cols(), "kd basis_f");
  detail::require_same_dim(d, eigs_a.size(), "kd eigs_a");
  detail::require_same_dim(d, eigs_f.size(), "kd eigs_f");
  const Operator state = rho.as(OperatorKind::density);

  KDTensor kd;
  kd.dim = d;
  kd.basis_a = basis_a;
  kd.basis_f = basis_f;
  kd.eigs_a = eigs_a;
  kd.eigs_f = eigs_f;

  if (opts.perturb_singular && detail::min_abs_overlap(basis_f, basis_a) < kOverlapFloor) {
    Rng rng(opts.seed);
    for (int attempt = 0; attempt < opts.attempts; ++attempt) {
      CMatrix candidate = detail::perturb_basis(basis_f, opts.angle, rng);
      if (detail::min_abs_overlap(candidate, basis_a) >= kOverlapFloor) {
        kd.basis_f = std::move(candidate);
        kd.perturbed = true;
        break;
      }
    }
  }

  const CMatrix overlap = kd.basis_f.adjoint() * kd.basis_a;                  // <f|a>
  const CMatrix rho_a = kd.basis_a.adjoint() * state.matrix() * kd.basis_a;  // <a|rho|a'>
  kd.values.resize(static_cast<std::size_t>(d * d * d));
  for (Index a = 0; a < d; ++a)
    for (Index ap = 0; ap < d; ++ap)
      for (Index f = 0; f < d; ++f)
        kd.values[kd.offset(a, ap, f)] = overlap(f, a) * rho_a(a, ap) * std::conj(overlap(f, ap));
  return kd;
}

/// q(a, a', f) for rho with {|a>} from A and {|f>} from F (projector or any
/// Hermitian operator).
inline KDTensor kd_doubly_extended(const Operator& rho, const Operator& a, const Operator& f,
                                   const KdOptions& opts = {}) {
  detail::require_same_dim(rho.dim(), a.dim(), "kd_doubly_extended");
  detail::require_same_dim(rho.dim(), f.dim(), "kd_doubly_extended");
  const auto bases = detail::select_bases(a, f.as(OperatorKind::hermitian));
  return kd_from_bases(rho, bases.a.vectors, bases.a.values, bases.f_basis, bases.f_values, opts);
}

/// Tensor whose postselected f-indices are the spanning states of `ps`
/// (completed by an orthonormal basis of the rejected subspace). A commuting
/// postselection uses the shared eigenbasis instead.
inline KDTensor kd_for_postselection(const Operator& rho, const Operator& a, const Postselection& ps,
                                     const KdOptions& opts = {}) {
  detail::require_same_dim(rho.dim(), a.dim(), "kd_for_postselection");
  detail::require_same_dim(rho.dim(), ps.dim(), "kd_for_postselection");
  if (detail::commutes(a, ps.projector())) return kd_doubly_extended(rho, a, ps.projector(), opts);

  const Index d = rho.dim();
  const Index r = ps.rank();
  const Eigensystem a_sys = refine_degenerate_blocks(eig_hermitian(a), ps.projector().matrix());
  const Eigensystem f_sys = eig_hermitian(ps.projector());
  CMatrix basis_f(d, d);
  RVector eigs_f = RVector::Zero(d);
  basis_f.leftCols(r) = ps.basis();
  eigs_f.head(r).setOnes();
  Index col = r;
  for (Index j = 0; j < d && col < d; ++j)
    if (f_sys.values[j] < 0.5) basis_f.col(col++) = f_sys.vectors.col(j);
  return kd_from_bases(rho, a_sys.vectors, a_sys.values, basis_f, eigs_f, opts);
}

/// f-indices inside the postselection (F eigenvalue 1).
inline IndexSet postselected_indices(const KDTensor& kd) {
  IndexSet out;
  for (Index f = 0; f < kd.dim; ++f)
    if (kd.eigs_f[f] > 0.5) out.push_back(f);
  return out;
}

inline IndexSet all_indices(const KDTensor& kd) {
  IndexSet out(static_cast<std::size_t>(kd.dim));
  for (Index f = 0; f < kd.dim; ++f) out[static_cast<std::size_t>(f)] = f;
  return out;
}

/// q(a, f) = <f|a><a|rho|f>, indexed [a][f].
inline CMatrix kd_standard(const Operator& rho, const CMatrix& basis_a, const CMatrix& basis_f) {
  detail::require_same_dim(rho.dim(), basis_a.rows(), "kd_standard");
  detail::require_same_dim(rho.dim(), basis_f.rows(), "kd_standard");
  const CMatrix overlap = basis_f.adjoint() * basis_a;                   // <f|a>
  const CMatrix rho_af = basis_a.adjoint() * rho.matrix() * basis_f;    // <a|rho|f>
  CMatrix q(basis_a.cols(), basis_f.cols());
  for (Index a = 0; a < q.rows(); ++a)
    for (Index f = 0; f < q.cols(); ++f) q(a, f) = overlap(f, a) * rho_af(a, f);
  return q;
}

inline CMatrix kd_standard(const Operator& rho, const Operator& a, const Operator& f) {
  detail::require_same_dim(rho.dim(), a.dim(), "kd_standard");
  detail::require_same_dim(rho.dim(), f.dim(), "kd_standard");
  const auto bases = detail::select_bases(a, f.as(OperatorKind::hermitian));
  return kd_standard(rho.as(OperatorKind::density), bases.a.vectors, bases.f_basis);
}

/// sum over a' of q(a, a', f), indexed [a][f].
inline CMatrix standard_marginal(const KDTensor& kd) {
  CMatrix q = CMatrix::Zero(kd.dim, kd.dim);
  for (Index a = 0; a < kd.dim; ++a)
    for (Index ap = 0; ap < kd.dim; ++ap)
      for (Index f = 0; f < kd.dim; ++f) q(a, f) += kd.at(a, ap, f);
  return q;
}

/// rho = sum q(a, a', f) |a><f| / <f|a>
inline Operator reconstruct_rho(const KDTensor& kd) {
  const Index d = kd.dim;
  const CMatrix overlap = kd.basis_f.adjoint() * kd.basis_a;
  if (overlap.cwiseAbs().minCoeff() < kOverlapFloor)
    fail(ErrorKind::SingularOverlap,
         "some <f|a> vanishes; rebuild the tensor with KdOptions::perturb_singular");
  CMatrix coeff = CMatrix::Zero(d, d);  // <a|rho|f>
  for (Index a = 0; a < d; ++a)
    for (Index f = 0; f < d; ++f) {
      Complex s = 0.0;
      for (Index ap = 0; ap < d; ++ap) s += kd.at(a, ap, f);
      coeff(a, f) = s / overlap(f, a);
    }
  return Operator(CMatrix(kd.basis_a * coeff * kd.basis_f.adjoint()), OperatorKind::density);
}

/// q restricted to f in the postselected set, divided by p_ps.
struct ConditionalKD {
  Index dim = 0;
  IndexSet ps_indices;
  std::vector<Complex> values;  // row-major over (a, a', k), k indexes ps_indices
  double p_ps = 0.0;

  Complex at(Index a, Index ap, std::size_t k) const {
    return values[(static_cast<std::size_t>(a * dim + ap)) * ps_indices.size() + k];
  }
};

inline ConditionalKD conditional_kd(const KDTensor& kd, const IndexSet& ps_indices) {
  if (ps_indices.empty()) fail(ErrorKind::VanishingPostselection, "empty postselection index set");
  for (Index f : ps_indices)
    if (f < 0 || f >= kd.dim) fail(ErrorKind::InvalidArgument, "postselection index out of range");

  ConditionalKD out;
  out.dim = kd.dim;
  out.ps_indices = ps_indices;
  const std::size_t r = ps_indices.size();
  out.values.resize(static_cast<std::size_t>(kd.dim * kd.dim) * r);
  Complex total = 0.0;
  for (Index a = 0; a < kd.dim; ++a)
    for (Index ap = 0; ap < kd.dim; ++ap)
      for (std::size_t k = 0; k < r; ++k) {
        const Complex q = kd.at(a, ap, ps_indices[k]);
        out.values[static_cast<std::size_t>(a * kd.dim + ap) * r + k] = q;
        total += q;
      }
  out.p_ps = total.real();
  if (out.p_ps <= kPostselectionFloor)
    fail(ErrorKind::VanishingPostselection, "p_ps = " + std::to_string(out.p_ps));
  for (Complex& q : out.values) q /= out.p_ps;
  return out;
}

/// 4 sum (q/p) a a' - 4 |sum (q/p) a|^2 over a, a' and f in the postselected set.
inline FisherReport qfi_from_kd(const KDTensor& kd, const IndexSet& ps_indices) {
  const ConditionalKD cond = conditional_kd(kd, ps_indices);
  Complex second_moment = 0.0;
  Complex mean = 0.0;
  for (Index a = 0; a < kd.dim; ++a)
    for (Index ap = 0; ap < kd.dim; ++ap)
      for (std::size_t k = 0; k < ps_indices.size(); ++k) {
        const Complex q = cond.at(a, ap, k);
        second_moment += q * (kd.eigs_a[a] * kd.eigs_a[ap]);
        mean += q * kd.eigs_a[a];
      }
  // Real by the Hermitian symmetry q(a, a', f) = conj(q(a', a, f)).
  if (std::abs(second_moment.imag()) > 1e-9 * std::max(1.0, std::abs(second_moment.real())))
    fail(ErrorKind::NumericalFailure, "second moment has imaginary part " +
                                          std::to_string(second_moment.imag()));
  const double first = 4.0 * second_moment.real();
  return detail::make_report(first - 4.0 * std::norm(mean), FisherMethod::quasiprobability, first);
}

struct NegativityReport {
  double min_real = 0.0;
  double negativity_mass = 0.0;  // sum of max(0, -Re q)
  double max_imag_abs = 0.0;
  bool is_classical = true;
};

namespace detail {

inline NegativityReport scan_negativity(const std::vector<Complex>& values) {
  NegativityReport r;
  r.min_real = std::numeric_limits<double>::infinity();
  for (const Complex& q : values) {
    r.min_real = std::min(r.min_real, q.real());
    r.negativity_mass += std::max(0.0, -q.real());
    r.max_imag_abs = std::max(r.max_imag_abs, std::abs(q.imag()));
  }
  if (values.empty()) r.min_real = 0.0;
  r.is_classical = r.min_real >= -kClassicalTol && r.max_imag_abs <= kClassicalTol;
  return r;
}

}  // namespace detail

/// Scan of every tensor entry.
inline NegativityReport negativity(const KDTensor& kd) { return detail::scan_negativity(kd.values); }

/// Scan of the conditional distribution q/p_ps over the postselected set.
inline NegativityReport negativity(const KDTensor& kd, const IndexSet& ps_indices) {
  return detail::scan_negativity(conditional_kd(kd, ps_indices).values);
}

inline NegativityReport negativity(const ConditionalKD& cond) {
  return detail::scan_negativity(cond.values);
}

/// <f|a><a|psi> / <f|psi>
inline Complex weak_value(const StateVector& a_state, const StateVector& f_state, const StateVector& psi) {
  detail::require_same_dim(a_state.dim(), psi.dim(), "weak_value");
  detail::require_same_dim(f_state.dim(), psi.dim(), "weak_value");
  const Complex f_psi = f_state.inner(psi);
  if (std::abs(f_psi) <= 1e-12)
    fail(ErrorKind::OrthogonalPostselection, "<f|psi> vanishes");
  return f_state.inner(a_state) * a_state.inner(psi) / f_psi;
}

/// max |q(a, a', f) - q(a, f) conj(q(a', f)) / p_f| over f with p_f > 1e-12,
/// with q(a, f) and p_f = <f|rho|f> computed directly from rho.
inline double pure_factorization_residual(const KDTensor& kd, const Operator& rho) {
  detail::require_same_dim(kd.dim, rho.dim(), "pure_factorization_residual");
  const Eigensystem es = eig_hermitian(rho);
  if (es.values[es.dim() - 1] < 1.0 - 1e-8)
    fail(ErrorKind::NotPure, "largest eigenvalue " + std::to_string(es.values[es.dim() - 1]));

  const CMatrix q_std = kd_standard(rho, kd.basis_a, kd.basis_f);
  double worst = 0.0;
  for (Index f = 0; f < kd.dim; ++f) {
    const double p_f = std::real(kd.basis_f.col(f).dot(rho.matrix() * kd.basis_f.col(f)));
    if (p_f <= 1e-12) continue;
    for (Index a = 0; a < kd.dim; ++a)
      for (Index ap = 0; ap < kd.dim; ++ap) {
        const Complex predicted = q_std(a, f) * std::conj(q_std(ap, f)) / p_f;
        worst = std::max(worst, std::abs(kd.at(a, ap, f) - predicted));
      }
  }
  return worst;
}

/// Copy with every generator eigenvalue shifted by `delta`.
inline KDTensor shift_eigenvalues(KDTensor kd, double delta) {
  kd.eigs_a.array() += delta;
  return kd;
}

}  // namespace psmet
