#pragma once

// Dense complex linear algebra over small Hilbert spaces: states, operators,
// Hermitian eigensystems with a deterministic vector convention, and unitary
// evolution generated by a Hermitian operator.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "psmet/error.hpp"

namespace psmet {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr Index kMaxDim = 64;

namespace tol {
inline constexpr double kNormalized = 1e-10;
inline constexpr double kHermitianInput = 1e-9;
inline constexpr double kProjector = 1e-10;
inline constexpr double kUnitary = 1e-10;
inline constexpr double kTrace = 1e-10;
inline constexpr double kPositivity = 1e-10;
inline constexpr double kDegeneracy = 1e-9;
inline constexpr double kPhaseAmplitude = 1e-9;
inline constexpr double kLexEqual = 1e-12;
}  // namespace tol

namespace detail {

inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(std::real(m(i, j))) || !std::isfinite(std::imag(m(i, j)))) return false;
  return true;
}

inline void check_dim(Index dim) {
  if (dim < 1 || dim > kMaxDim)
    fail(ErrorKind::InvalidDim, "dimension " + std::to_string(dim) + " outside [1, 64]");
}

inline void require_same_dim(Index a, Index b, const char* what) {
  if (a != b)
    fail(ErrorKind::DimensionMismatch,
         std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
}

inline CMatrix hermitian_part(const CMatrix& m) { return (m + m.adjoint()) * 0.5; }

// Multiplies v by a phase so that its first amplitude above threshold is real positive.
inline void fix_phase(Eigen::Ref<CVector> v) {
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]);
    if (mag > tol::kPhaseAmplitude) {
      v *= std::conj(v[i]) / mag;
      v[i] = Complex(mag, 0.0);
      return;
    }
  }
}

inline bool lex_greater(const CVector& x, const CVector& y) {
  for (Index i = 0; i < x.size(); ++i) {
    const double dr = x[i].real() - y[i].real();
    if (std::abs(dr) > tol::kLexEqual) return dr > 0;
    const double di = x[i].imag() - y[i].imag();
    if (std::abs(di) > tol::kLexEqual) return di > 0;
  }
  return false;
}

// Canonical orthonormal basis of the span of `block`: Gram-Schmidt over the
// columns of the block projector taken in index order.
inline CMatrix canonical_span_basis(const CMatrix& block) {
  const Index d = block.rows();
  const Index r = block.cols();
  const CMatrix projector = block * block.adjoint();
  CMatrix out(d, r);
  Index found = 0;
  for (Index j = 0; j < d && found < r; ++j) {
    CVector v = projector.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (Index i = 0; i < found; ++i) v -= out.col(i) * out.col(i).dot(v);
    const double n = v.norm();
    if (n > 1e-3) out.col(found++) = v / n;
  }
  // The residual projector always keeps a column of norm >= 1/sqrt(d), so this
  // cannot trigger for d <= 64; keep the solver's vectors if it ever does.
  if (found < r) return block;
  return out;
}

}  // namespace detail

/// Pure state amplitudes. Normalized unless built through `unnormalized`.
class StateVector {
 public:
  explicit StateVector(CVector amplitudes) : StateVector(std::move(amplitudes), true) {}

  static StateVector unnormalized(CVector amplitudes) {
    return StateVector(std::move(amplitudes), false);
  }

  /// Rescales to unit norm; fails on the zero vector.
  static StateVector normalize(const CVector& amplitudes) {
    const double n = amplitudes.norm();
    if (!(n > 1e-300)) fail(ErrorKind::NotNormalized, "cannot normalize the zero vector");
    return StateVector(CVector(amplitudes / n));
  }

  static StateVector basis(Index dim, Index index) {
    detail::check_dim(dim);
    if (index < 0 || index >= dim) fail(ErrorKind::InvalidArgument, "basis index out of range");
    CVector v = CVector::Zero(dim);
    v[index] = 1.0;
    return StateVector(std::move(v));
  }

  Index dim() const noexcept { return amps_.size(); }
  const CVector& amplitudes() const noexcept { return amps_; }
  Complex operator[](Index i) const { return amps_[i]; }
  bool is_normalized() const noexcept { return normalized_; }
  double norm_squared() const { return amps_.squaredNorm(); }

  /// <this|other>
  Complex inner(const StateVector& other) const {
    detail::require_same_dim(dim(), other.dim(), "inner product");
    return amps_.dot(other.amps_);
  }

 private:
  StateVector(CVector amplitudes, bool normalized)
      : amps_(std::move(amplitudes)), normalized_(normalized) {
    detail::check_dim(amps_.size());
    if (!detail::all_finite(amps_)) fail(ErrorKind::NonFinite, "state has non-finite amplitudes");
    if (normalized_ && std::abs(amps_.squaredNorm() - 1.0) > tol::kNormalized)
      fail(ErrorKind::NotNormalized,
           "state norm^2 = " + std::to_string(amps_.squaredNorm()) + ", expected 1");
  }

  CVector amps_;
  bool normalized_ = true;
};

enum class OperatorKind { general, hermitian, unitary, projector, density };

/// Dense square operator tagged with the structural property it satisfies.
/// Hermitian-like kinds are symmetrized on construction once the input passes
/// the Hermiticity check, so M = M^dagger holds to rounding afterwards.
class Operator {
 public:
  explicit Operator(CMatrix entries, OperatorKind kind = OperatorKind::general)
      : m_(std::move(entries)), kind_(kind) {
    validate();
  }

  static Operator identity(Index dim) {
    detail::check_dim(dim);
    return Operator(CMatrix::Identity(dim, dim), OperatorKind::hermitian);
  }

  static Operator diagonal(const RVector& values) {
    detail::check_dim(values.size());
    CMatrix m = CMatrix::Zero(values.size(), values.size());
    for (Index i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return Operator(std::move(m), OperatorKind::hermitian);
  }

  static Operator diagonal(const std::vector<double>& values) {
    return diagonal(RVector(Eigen::Map<const RVector>(values.data(), Index(values.size()))));
  }

  /// |psi><psi| for a normalized state.
  static Operator pure(const StateVector& psi) {
    if (!psi.is_normalized()) fail(ErrorKind::NotNormalized, "pure density needs a normalized state");
    return Operator(CMatrix(psi.amplitudes() * psi.amplitudes().adjoint()), OperatorKind::density);
  }

  /// Orthogonal projector onto the column span of an orthonormal set.
  static Operator projector_onto(const CMatrix& orthonormal_columns) {
    return Operator(CMatrix(orthonormal_columns * orthonormal_columns.adjoint()),
                    OperatorKind::projector);
  }

  Index dim() const noexcept { return m_.rows(); }
  OperatorKind kind() const noexcept { return kind_; }
  const CMatrix& matrix() const noexcept { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }
  Complex trace() const { return m_.trace(); }

  /// Same entries, revalidated as `kind`.
  Operator as(OperatorKind kind) const {
    if (kind == kind_ || kind == OperatorKind::general) return Operator(*this, kind);
    if (kind_ == OperatorKind::density && kind == OperatorKind::hermitian) return Operator(*this, kind);
    if (kind_ == OperatorKind::projector && kind == OperatorKind::hermitian) return Operator(*this, kind);
    return Operator(m_, kind);
  }

 private:
  Operator(const Operator& other, OperatorKind kind) : m_(other.m_), kind_(kind) {}

  void validate() {
    if (m_.rows() != m_.cols())
      fail(ErrorKind::DimensionMismatch, "operator must be square");
    detail::check_dim(m_.rows());
    if (!detail::all_finite(m_)) fail(ErrorKind::NonFinite, "operator has non-finite entries");

    const Index d = m_.rows();
    switch (kind_) {
      case OperatorKind::general:
        return;
      case OperatorKind::unitary: {
        const double dev = detail::max_abs(m_.adjoint() * m_ - CMatrix::Identity(d, d));
        if (dev > tol::kUnitary)
          fail(ErrorKind::NotUnitary, "|U^dagger U - 1|_max = " + std::to_string(dev));
        return;
      }
      case OperatorKind::hermitian:
      case OperatorKind::projector:
      case OperatorKind::density:
        break;
    }

    const double scale = std::max(1.0, detail::max_abs(m_));
    const double herm_dev = detail::max_abs(m_ - m_.adjoint());
    if (herm_dev > tol::kHermitianInput * scale)
      fail(ErrorKind::NotHermitian, "|M - M^dagger|_max = " + std::to_string(herm_dev));
    m_ = detail::hermitian_part(m_);

    if (kind_ == OperatorKind::projector) {
      const double dev = detail::max_abs(m_ * m_ - m_);
      if (dev > tol::kProjector)
        fail(ErrorKind::NotProjector, "|P^2 - P|_max = " + std::to_string(dev));
    } else if (kind_ == OperatorKind::density) {
      const double tr = m_.trace().real();
      if (std::abs(tr - 1.0) > tol::kTrace)
        fail(ErrorKind::NotDensity, "trace = " + std::to_string(tr));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(m_), Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -tol::kPositivity)
        fail(ErrorKind::NotDensity,
             "negative eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));
    }
  }

  CMatrix m_;
  OperatorKind kind_;
};

/// Ascending eigenvalues with column-orthonormal eigenvectors.
///
/// Convention: the first amplitude of each vector above 1e-9 in magnitude is
/// real positive. Within a degenerate block (|lambda_i - lambda_j| <=
/// 1e-9 max(1, |H|)) the basis is rebuilt from the block projector by
/// Gram-Schmidt in index order and ordered by descending lexicographic
/// comparison of (re, im) amplitude sequences.
struct Eigensystem {
  RVector values;
  CMatrix vectors;
  std::vector<int> multiplicity_index;  // position inside the degenerate block
  std::vector<int> block_id;

  Index dim() const noexcept { return values.size(); }
  CVector vector(Index j) const { return vectors.col(j); }
  StateVector state(Index j) const { return StateVector(CVector(vectors.col(j))); }

  /// [begin, end) column ranges of degenerate blocks.
  std::vector<std::pair<Index, Index>> blocks() const {
    std::vector<std::pair<Index, Index>> out;
    for (Index j = 0; j < dim(); ++j) {
      if (j == 0 || block_id[j] != block_id[j - 1]) out.emplace_back(j, j + 1);
      else out.back().second = j + 1;
    }
    return out;
  }
};

inline Eigensystem eig_hermitian(const CMatrix& h) {
  if (h.rows() != h.cols()) fail(ErrorKind::DimensionMismatch, "eig_hermitian needs a square matrix");
  detail::check_dim(h.rows());
  if (!detail::all_finite(h)) fail(ErrorKind::NonFinite, "matrix has non-finite entries");
  const double herm_dev = detail::max_abs(h - h.adjoint());
  if (herm_dev > tol::kHermitianInput)
    fail(ErrorKind::NotHermitian, "|H - H^dagger|_max = " + std::to_string(herm_dev));

  const Eigen::MatrixXcd sym = detail::hermitian_part(h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym);
  if (es.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigensolver did not converge");

  const Index d = h.rows();
  Eigensystem out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  out.multiplicity_index.assign(d, 0);
  out.block_id.assign(d, 0);

  const double scale = std::max(1.0, out.values.cwiseAbs().maxCoeff());
  Index begin = 0;
  int block = 0;
  while (begin < d) {
    Index end = begin + 1;
    while (end < d && out.values[end] - out.values[end - 1] <= tol::kDegeneracy * scale) ++end;
    const Index r = end - begin;

    CMatrix cols = out.vectors.middleCols(begin, r);
    if (r > 1) cols = detail::canonical_span_basis(cols);
    std::vector<CVector> vs;
    for (Index j = 0; j < r; ++j) {
      CVector v = cols.col(j);
      detail::fix_phase(v);
      vs.push_back(std::move(v));
    }
    std::stable_sort(vs.begin(), vs.end(), detail::lex_greater);
    for (Index j = 0; j < r; ++j) {
      out.vectors.col(begin + j) = vs[j];
      out.multiplicity_index[begin + j] = static_cast<int>(j);
      out.block_id[begin + j] = block;
    }
    ++block;
    begin = end;
  }
  return out;
}

inline Eigensystem eig_hermitian(const Operator& h) { return eig_hermitian(h.matrix()); }

/// Re-diagonalizes `b` inside each degenerate block of `es`. When b commutes
/// with the operator behind `es`, the result diagonalizes both.
inline Eigensystem refine_degenerate_blocks(const Eigensystem& es, const CMatrix& b) {
  detail::require_same_dim(es.dim(), b.rows(), "refine_degenerate_blocks");
  Eigensystem out = es;
  for (const auto& [begin, end] : es.blocks()) {
    const Index r = end - begin;
    if (r < 2) continue;
    const CMatrix vb = es.vectors.middleCols(begin, r);
    const CMatrix restricted = detail::hermitian_part(vb.adjoint() * b * vb);
    const Eigensystem inner = eig_hermitian(restricted);
    CMatrix rotated = vb * inner.vectors;
    for (Index j = 0; j < r; ++j) {
      CVector v = rotated.col(j);
      detail::fix_phase(v);
      out.vectors.col(begin + j) = v;
    }
  }
  return out;
}

/// max |AB - BA|
inline double commutator_norm(const Operator& a, const Operator& b) {
  detail::require_same_dim(a.dim(), b.dim(), "commutator");
  return detail::max_abs(a.matrix() * b.matrix() - b.matrix() * a.matrix());
}

/// exp(-i A theta) assembled from the spectral decomposition of A.
inline CMatrix unitary_matrix(const Eigensystem& a, double theta) {
  CVector phases(a.dim());
  for (Index j = 0; j < a.dim(); ++j) phases[j] = std::polar(1.0, -a.values[j] * theta);
  return a.vectors * phases.asDiagonal() * a.vectors.adjoint();
}

inline Operator unitary(const Operator& a, double theta) {
  return Operator(unitary_matrix(eig_hermitian(a), theta), OperatorKind::unitary);
}

/// U rho0 U^dagger with U = exp(-i A theta).
inline Operator evolve(const Operator& rho0, const Operator& a, double theta) {
  detail::require_same_dim(rho0.dim(), a.dim(), "evolve");
  const Operator rho = rho0.as(OperatorKind::density);
  const Eigensystem es = eig_hermitian(a);
  if (theta == 0.0) return rho;
  const CMatrix u = unitary_matrix(es, theta);
  return Operator(CMatrix(u * rho.matrix() * u.adjoint()), OperatorKind::density);
}

inline StateVector evolve(const StateVector& psi0, const Operator& a, double theta) {
  detail::require_same_dim(psi0.dim(), a.dim(), "evolve");
  const Eigensystem es = eig_hermitian(a);
  if (theta == 0.0) return psi0;
  CVector out = unitary_matrix(es, theta) * psi0.amplitudes();
  return psi0.is_normalized() ? StateVector(std::move(out)) : StateVector::unnormalized(std::move(out));
}

/// Tr(rho A^2) - Tr(rho A)^2, with rounding-level negatives clamped to zero.
inline double variance(const Operator& rho, const Operator& a) {
  detail::require_same_dim(rho.dim(), a.dim(), "variance");
  const CMatrix ra = rho.matrix() * a.matrix();
  const double second = (ra * a.matrix()).trace().real();
  const double first = ra.trace().real();
  const double v = second - first * first;
  const double floor = 1e-12 * std::max(1.0, second);
  if (v < 0.0 && v >= -floor) return 0.0;
  return v;
}

inline double variance(const StateVector& psi, const Operator& a) {
  return variance(Operator::pure(psi), a);
}

/// a_max - a_min
inline double spectral_range(const Operator& a) {
  const Eigensystem es = eig_hermitian(a);
  return es.values[es.dim() - 1] - es.values[0];
}

// ---------------------------------------------------------------------------
// Random ensembles. All draws come from std::mt19937_64 so a seed pins the
// output for a given standard library.

using Rng = std::mt19937_64;

inline Complex complex_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

/// GUE-style: Gaussian entries, symmetrized.
inline Operator random_hermitian(Index dim, Rng& rng) {
  detail::check_dim(dim);
  CMatrix g(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) g(i, j) = complex_normal(rng);
  return Operator(detail::hermitian_part(g), OperatorKind::hermitian);
}

inline StateVector haar_state(Index dim, Rng& rng) {
  detail::check_dim(dim);
  CVector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = complex_normal(rng);
  return StateVector::normalize(v);
}

/// QR of a Ginibre matrix with the R-diagonal phases divided out.
inline CMatrix haar_unitary(Index dim, Rng& rng) {
  detail::check_dim(dim);
  Eigen::MatrixXcd g(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) g(i, j) = complex_normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    const double mag = std::abs(r(j, j));
    if (mag > 0) q.col(j) *= r(j, j) / mag;
  }
  return q;
}

struct RandomInstance {
  Operator A;
  Operator F;
  StateVector psi0;
  CMatrix f_basis;  // orthonormal columns spanning the range of F
};

/// Random generator, postselection projector and Haar input state.
/// With `commuting`, F projects onto a random nonempty proper subset of A's
/// eigenvectors; otherwise onto a random subspace of random dimension.
inline RandomInstance random_instance(Index dim, std::uint64_t seed, bool commuting) {
  if (dim < 2 || dim > kMaxDim)
    fail(ErrorKind::InvalidDim, "random_instance needs 2 <= dim <= 64, got " + std::to_string(dim));
  Rng rng(seed);
  Operator a = random_hermitian(dim, rng);
  StateVector psi0 = haar_state(dim, rng);
  std::uniform_int_distribution<Index> rank_dist(1, dim - 1);
  const Index rank = rank_dist(rng);

  CMatrix basis(dim, rank);
  if (commuting) {
    const Eigensystem es = eig_hermitian(a);
    std::vector<Index> idx(dim);
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = dim - 1; i > 0; --i) {
      std::uniform_int_distribution<Index> pick(0, i);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::sort(idx.begin(), idx.begin() + rank);
    for (Index j = 0; j < rank; ++j) basis.col(j) = es.vectors.col(idx[j]);
  } else {
    basis = haar_unitary(dim, rng).leftCols(rank);
  }
  Operator f = Operator::projector_onto(basis);
  return RandomInstance{std::move(a), std::move(f), std::move(psi0), std::move(basis)};
}

}  // namespace psmet
