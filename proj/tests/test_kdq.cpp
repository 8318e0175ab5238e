#include <gtest/gtest.h>

#include "oracles.hpp"
#include "psmet/kdq.hpp"
#include "psmet/protocols.hpp"

using namespace psmet;

namespace {

const double r2 = 1 / std::sqrt(2.0);

StateVector plus() { return StateVector(CVector(CVector::Constant(2, r2))); }

Operator pauli_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return Operator(m, OperatorKind::hermitian);
}

Operator pauli_z() { return Operator::diagonal(std::vector<double>{1, -1}); }

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::NumericalFailure;
}

Operator random_density(Index d, Rng& rng) {
  CMatrix g(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) = complex_normal(rng);
  CMatrix r = g * g.adjoint();
  r /= r.trace();
  return Operator(r, OperatorKind::density);
}

Complex total(const KDTensor& kd) {
  Complex s = 0.0;
  for (const Complex& q : kd.values) s += q;
  return s;
}

}  // namespace

TEST(KdTensor, MatchesBruteForceOracle) {
  Rng rng(41);
  for (int t = 0; t < 30; ++t) {
    const Index d = 2 + t % 5;
    const Operator rho = random_density(d, rng);
    const Operator a = random_hermitian(d, rng);
    const Operator f = random_hermitian(d, rng);
    const KDTensor kd = kd_doubly_extended(rho, a, f);
    const auto expected = oracle::kd(rho.matrix(), kd.basis_a, kd.basis_f);
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_LT(std::abs(kd.values[i] - expected[i]), 1e-13);
  }
}

TEST(KdTensor, SharedBasisCollapsesToDiagonal) {
  Rng rng(42);
  const Operator rho = random_density(3, rng);
  const Operator a = Operator::diagonal(std::vector<double>{-1, 0.5, 2});
  const Operator f = Operator::diagonal(std::vector<double>{1, 0, 1});
  const KDTensor kd = kd_doubly_extended(rho, a, f);
  for (Index x = 0; x < 3; ++x)
    for (Index y = 0; y < 3; ++y)
      for (Index z = 0; z < 3; ++z) {
        const Complex expected = (x == y && y == z) ? rho(x, x) : Complex(0.0);
        EXPECT_LT(std::abs(kd.at(x, y, z) - expected), 1e-14);
      }
  EXPECT_TRUE(negativity(kd).is_classical);
}

TEST(KdTensor, PlusStateInZXBases) {
  const KDTensor kd = kd_doubly_extended(Operator::pure(plus()), pauli_z(), pauli_x());
  // a index 0 is |1> (eigenvalue -1), 1 is |0>; f index 0 is |->, 1 is |+>.
  for (Index a = 0; a < 2; ++a)
    for (Index ap = 0; ap < 2; ++ap) {
      EXPECT_LT(std::abs(kd.at(a, ap, 1) - 0.25), 1e-15);
      EXPECT_LT(std::abs(kd.at(a, ap, 0) - (a == ap ? 0.25 : -0.25)), 1e-15);
    }
  EXPECT_LT(negativity(kd).max_imag_abs, 1e-15);
}

TEST(KdTensor, MaximallyMixedIsClassical) {
  Rng rng(43);
  for (Index d : {2, 3, 5}) {
    const Operator rho(CMatrix(CMatrix::Identity(d, d) / double(d)), OperatorKind::density);
    const KDTensor kd = kd_doubly_extended(rho, random_hermitian(d, rng), random_hermitian(d, rng));
    for (Index a = 0; a < d; ++a)
      for (Index ap = 0; ap < d; ++ap)
        for (Index f = 0; f < d; ++f) {
          const double expected = a == ap ? std::norm(kd.basis_f.col(f).dot(kd.basis_a.col(a))) / d : 0.0;
          EXPECT_LT(std::abs(kd.at(a, ap, f) - expected), 1e-14);
        }
    EXPECT_TRUE(negativity(kd).is_classical);
    const CMatrix q = standard_marginal(kd);
    for (Index f = 0; f < d; ++f) EXPECT_NEAR(q.col(f).sum().real(), 1.0 / d, 1e-14);
  }
}

TEST(KdTensor, StructuralInvariants) {
  Rng rng(44);
  for (int t = 0; t < 60; ++t) {
    const Index d = 2 + t % 5;
    const Operator rho = random_density(d, rng);
    const Operator a = random_hermitian(d, rng);
    const Operator f = random_hermitian(d, rng);
    const KDTensor kd = kd_doubly_extended(rho, a, f);
    EXPECT_LT(std::abs(total(kd) - 1.0), 1e-9);
    for (Index x = 0; x < d; ++x)
      for (Index y = 0; y < d; ++y)
        for (Index z = 0; z < d; ++z) EXPECT_LT(std::abs(kd.at(x, y, z) - std::conj(kd.at(y, x, z))), 1e-10);

    const CMatrix marginal = standard_marginal(kd);
    const CMatrix standard = kd_standard(rho, a, f);
    EXPECT_LT(detail::max_abs(marginal - standard), 1e-12);
    EXPECT_LT(std::abs(standard.sum() - 1.0), 1e-10);
    for (Index z = 0; z < d; ++z) {
      const Complex pf = standard.col(z).sum();
      EXPECT_NEAR(pf.real(), std::real(kd.basis_f.col(z).dot(rho.matrix() * kd.basis_f.col(z))), 1e-12);
      EXPECT_GE(pf.real(), -1e-12);
      EXPECT_NEAR(pf.imag(), 0.0, 1e-12);
    }
    for (Index x = 0; x < d; ++x) {
      const Complex pa = standard.row(x).sum();
      EXPECT_NEAR(pa.real(), std::real(kd.basis_a.col(x).dot(rho.matrix() * kd.basis_a.col(x))), 1e-12);
      EXPECT_NEAR(pa.imag(), 0.0, 1e-12);
    }
  }
}

TEST(KdStandard, DiagonalStateIsNonnegative) {
  Rng rng(45);
  const Operator rho = Operator::diagonal(std::vector<double>{0.2, 0.3, 0.5}).as(OperatorKind::density);
  const Operator a = Operator::diagonal(std::vector<double>{1, 2, 3});
  const Operator f = random_hermitian(3, rng);
  const CMatrix q = kd_standard(rho, a, f);
  const auto bases = detail::select_bases(a, f);
  for (Index x = 0; x < 3; ++x)
    for (Index z = 0; z < 3; ++z) {
      EXPECT_NEAR(q(x, z).real(), rho(x, x).real() * std::norm(bases.f_basis.col(z).dot(bases.a.vectors.col(x))),
                  1e-14);
      EXPECT_NEAR(q(x, z).imag(), 0.0, 1e-14);
    }
}

TEST(KdStandard, NegativeEntryByHand) {
  CVector v(2);
  v << std::cos(0.3), std::sin(0.3);
  const Operator rho = Operator::pure(StateVector(v));
  const CMatrix q = kd_standard(rho, Operator::diagonal(std::vector<double>{0, 1}), pauli_x());
  // a index 1 is |1>, f index 0 is |->.
  const double expected = -std::sin(0.3) * (std::cos(0.3) - std::sin(0.3)) / 2;
  EXPECT_NEAR(q(1, 0).real(), expected, 1e-15);
  EXPECT_LT(q(1, 0).real(), 0);
}

TEST(Reconstruct, RandomRoundTrip) {
  Rng rng(46);
  for (int t = 0; t < 50; ++t) {
    const Operator rho = random_density(4, rng);
    const KDTensor kd = kd_doubly_extended(rho, random_hermitian(4, rng), random_hermitian(4, rng));
    EXPECT_LT(detail::max_abs(reconstruct_rho(kd).matrix() - rho.matrix()), 1e-8);
  }
}

TEST(Reconstruct, MutuallyUnbiasedIsExact) {
  Rng rng(47);
  for (int t = 0; t < 10; ++t) {
    const Operator rho = random_density(2, rng);
    const KDTensor kd = kd_doubly_extended(rho, pauli_z(), pauli_x());
    EXPECT_LT(detail::max_abs(reconstruct_rho(kd).matrix() - rho.matrix()), 1e-10);
  }
}

TEST(Reconstruct, SharedBasisNeedsPerturbation) {
  Rng rng(48);
  const Operator rho = random_density(3, rng);
  const Operator a = Operator::diagonal(std::vector<double>{0, 1, 2});
  const Operator f = Operator::diagonal(std::vector<double>{5, 3, 1});
  EXPECT_EQ(kind_of([&] { reconstruct_rho(kd_doubly_extended(rho, a, f)); }), ErrorKind::SingularOverlap);

  KdOptions opts;
  opts.perturb_singular = true;
  const KDTensor kd = kd_doubly_extended(rho, a, f, opts);
  EXPECT_TRUE(kd.perturbed);
  EXPECT_LT(detail::max_abs(kd.basis_f.adjoint() * kd.basis_f - CMatrix::Identity(3, 3)), 1e-12);
  EXPECT_LT(detail::max_abs(reconstruct_rho(kd).matrix() - rho.matrix()), 1e-8);
}

TEST(ConditionalKd, AllIndicesIsIdentity) {
  Rng rng(49);
  const Operator rho = random_density(3, rng);
  const KDTensor kd = kd_doubly_extended(rho, random_hermitian(3, rng), random_hermitian(3, rng));
  const ConditionalKD c = conditional_kd(kd, all_indices(kd));
  EXPECT_NEAR(c.p_ps, 1.0, 1e-12);
  for (Index a = 0; a < 3; ++a)
    for (Index ap = 0; ap < 3; ++ap)
      for (std::size_t f = 0; f < 3; ++f) EXPECT_LT(std::abs(c.at(a, ap, f) - kd.at(a, ap, Index(f))), 1e-12);
}

TEST(ConditionalKd, CommutingGivesTheoremOneProbabilities) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RandomInstance r = random_instance(4, 500 + s, true);
    const Postselection ps = Postselection::from_basis(r.f_basis);
    const Operator rho = evolve(Operator::pure(r.psi0), r.A, 0.7);
    const KDTensor kd = kd_for_postselection(rho, r.A, ps);
    const IndexSet idx = postselected_indices(kd);
    const ConditionalKD c = conditional_kd(kd, idx);
    for (Index a = 0; a < 4; ++a) {
      Complex qa = 0.0;
      for (Index ap = 0; ap < 4; ++ap)
        for (std::size_t k = 0; k < idx.size(); ++k) qa += c.at(a, ap, k);
      const CVector v = kd.basis_a.col(a);
      const double expected = std::real(v.dot(rho.matrix() * r.F.matrix() * v)) / c.p_ps;
      EXPECT_NEAR(qa.real(), expected, 1e-10);
      EXPECT_NEAR(qa.imag(), 0.0, 1e-10);
    }
    EXPECT_TRUE(negativity(c).is_classical);
  }
}

TEST(ConditionalKd, ProbabilityMatchesPostselection) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RandomInstance r = random_instance(2 + Index(s % 5), 600 + s, false);
    const Postselection ps = Postselection::from_basis(r.f_basis);
    const KDTensor kd = kd_for_postselection(Operator::pure(r.psi0), r.A, ps);
    const double p = apply_postselection(r.psi0, ps).p_ps();
    if (p <= 1e-12) continue;
    EXPECT_NEAR(conditional_kd(kd, postselected_indices(kd)).p_ps, p, 1e-10);
  }
}

TEST(ConditionalKd, Errors) {
  const KDTensor kd = kd_doubly_extended(Operator::pure(StateVector::basis(2, 0)), pauli_z(), pauli_z());
  // f index 0 carries F eigenvalue -1, i.e. |1>, which the state misses.
  EXPECT_EQ(kind_of([&] { conditional_kd(kd, {0}); }), ErrorKind::VanishingPostselection);
  EXPECT_EQ(kind_of([&] { conditional_kd(kd, {}); }), ErrorKind::VanishingPostselection);
  EXPECT_EQ(kind_of([&] { conditional_kd(kd, {5}); }), ErrorKind::InvalidArgument);
}

TEST(QfiFromKd, MatchesTraceForm) {
  int checked = 0;
  for (std::uint64_t s = 0; checked < 100; ++s) {
    const RandomInstance r = random_instance(2 + Index(s % 5), 700 + s, false);
    const Postselection ps = Postselection::from_basis(r.f_basis);
    const double theta = 0.3 * double(s % 7);
    const Operator rho = evolve(Operator::pure(r.psi0), r.A, theta);
    if (postselection_probability(rho, ps) <= 0.01) continue;
    ++checked;
    const KDTensor kd = kd_for_postselection(rho, r.A, ps);
    const FisherReport from_kd = qfi_from_kd(kd, postselected_indices(kd));
    const double trace = postselected_qfi(r.psi0, r.A, ps, theta).value;
    EXPECT_NEAR(from_kd.value, trace, 1e-8 * std::max(1.0, trace)) << s;
    EXPECT_EQ(from_kd.method, FisherMethod::quasiprobability);
  }
}

TEST(QfiFromKd, NoPostselectionIsFourVariance) {
  Rng rng(50);
  for (int t = 0; t < 20; ++t) {
    const Index d = 2 + t % 5;
    const Operator a = random_hermitian(d, rng);
    const StateVector psi = haar_state(d, rng);
    const KDTensor kd = kd_doubly_extended(Operator::pure(psi), a, random_hermitian(d, rng));
    const double expected = 4 * variance(psi, a);
    EXPECT_NEAR(qfi_from_kd(kd, all_indices(kd)).value, expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(QfiFromKd, CommutingBound) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const RandomInstance r = random_instance(2 + Index(s % 5), 800 + s, true);
    const Postselection ps = Postselection::from_basis(r.f_basis);
    const KDTensor kd = kd_for_postselection(Operator::pure(r.psi0), r.A, ps);
    if (apply_postselection(r.psi0, ps).p_ps() <= 1e-10) continue;
    const double range = spectral_range(r.A);
    EXPECT_LE(qfi_from_kd(kd, postselected_indices(kd)).value, range * range + 1e-8);
    EXPECT_TRUE(negativity(kd, postselected_indices(kd)).is_classical);
  }
}

TEST(QfiFromKd, EigenvalueShiftInvariance) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RandomInstance r = random_instance(3, 900 + s, s % 2 == 0);
    const Postselection ps = Postselection::from_basis(r.f_basis);
    if (apply_postselection(r.psi0, ps).p_ps() <= 1e-3) continue;
    const KDTensor kd = kd_for_postselection(Operator::pure(r.psi0), r.A, ps);
    const IndexSet idx = postselected_indices(kd);
    const double base = qfi_from_kd(kd, idx).value;
    for (double delta : {-3.0, 0.5, 10.0})
      EXPECT_NEAR(qfi_from_kd(shift_eigenvalues(kd, delta), idx).value, base,
                  1e-8 * std::max(1.0, base) * std::max(1.0, delta * delta));
  }
}

TEST(QfiFromKd, DegenerateBlockRotationDoesNotMatter) {
  Rng rng(51);
  for (int t = 0; t < 30; ++t) {
    const CMatrix v = haar_unitary(4, rng);
    const Operator a(CMatrix(v * Operator::diagonal(std::vector<double>{0, 0, 1, 2.5}).matrix() * v.adjoint()),
                     OperatorKind::hermitian);
    const CMatrix fb = haar_unitary(4, rng).leftCols(2);
    const Postselection ps = Postselection::from_basis(fb);
    const StateVector psi = haar_state(4, rng);
    if (apply_postselection(psi, ps).p_ps() <= 1e-3) continue;
    const Operator rho = Operator::pure(psi);
    const KDTensor kd = kd_for_postselection(rho, a, ps);
    const IndexSet idx = postselected_indices(kd);

    CMatrix rotated_a = kd.basis_a;
    ASSERT_NEAR(kd.eigs_a[0], kd.eigs_a[1], 1e-9);
    rotated_a.leftCols(2) = kd.basis_a.leftCols(2) * haar_unitary(2, rng);
    const KDTensor other = kd_from_bases(rho, rotated_a, kd.eigs_a, kd.basis_f, kd.eigs_f);
    const double base = qfi_from_kd(kd, idx).value;
    EXPECT_NEAR(qfi_from_kd(other, idx).value, base, 1e-8 * std::max(1.0, base));
  }
}

TEST(Negativity, AnomalyImpliesNegativity) {
  int anomalies = 0;
  for (std::uint64_t s = 0; s < 3000; ++s) {
    const RandomInstance r = random_instance(3, 10000 + s, false);
    const Postselection ps = Postselection::from_basis(r.f_basis);
    if (apply_postselection(r.psi0, ps).p_ps() <= 1e-10) continue;
    const KDTensor kd = kd_for_postselection(Operator::pure(r.psi0), r.A, ps);
    const IndexSet idx = postselected_indices(kd);
    const double range = spectral_range(r.A);
    if (qfi_from_kd(kd, idx).value > range * range * (1 + 1e-6)) {
      ++anomalies;
      EXPECT_LT(negativity(kd, idx).min_real, 0.0) << s;
    }
  }
  EXPECT_GT(anomalies, 50);
}

TEST(Negativity, ReportFields) {
  const KDTensor kd = kd_doubly_extended(Operator::pure(plus()), pauli_z(), pauli_x());
  const NegativityReport n = negativity(kd);
  EXPECT_NEAR(n.min_real, -0.25, 1e-15);
  EXPECT_NEAR(n.negativity_mass, 0.5, 1e-15);
  EXPECT_FALSE(n.is_classical);
}

TEST(Negativity, Supp3InstanceIsNegative) {
  ProtocolConfig cfg;
  cfg.eigenvalues = {-1, 1, 3};
  cfg.phi = 0.05;
  const ProtocolInstance inst = supp3_construct(cfg);
  const KDTensor kd = kd_for_postselection(Operator::pure(inst.psi0), inst.A, inst.ps);
  const IndexSet idx = postselected_indices(kd);
  EXPECT_GT(qfi_from_kd(kd, idx).value, 16.0);
  EXPECT_LT(negativity(kd, idx).min_real, 0.0);
}

TEST(WeakValue, Examples) {
  Rng rng(52);
  const StateVector psi = haar_state(3, rng);
  EXPECT_LT(std::abs(weak_value(psi, psi, psi) - 1.0), 1e-14);

  const StateVector zero = StateVector::basis(2, 0);
  EXPECT_LT(std::abs(weak_value(zero, plus(), plus()) - 0.5), 1e-15);

  CVector v(2);
  v << std::cos(0.7), std::sin(0.7);
  CVector m(2);
  m << r2, -r2;
  const Complex w = weak_value(zero, StateVector(m), StateVector(v));
  EXPECT_NEAR(w.real(), std::cos(0.7) / (std::cos(0.7) - std::sin(0.7)), 1e-12);
  EXPECT_GT(w.real(), 1.0);

  EXPECT_EQ(kind_of([&] { weak_value(zero, StateVector::basis(2, 1), zero); }), ErrorKind::OrthogonalPostselection);
}

TEST(PureFactorization, RandomPureStates) {
  Rng rng(53);
  for (int t = 0; t < 50; ++t) {
    const Index d = 2 + t % 5;
    const Operator rho = Operator::pure(haar_state(d, rng));
    const KDTensor kd = kd_doubly_extended(rho, random_hermitian(d, rng), random_hermitian(d, rng));
    EXPECT_LT(pure_factorization_residual(kd, rho), 1e-10);
  }
}

TEST(PureFactorization, PlusInZXBases) {
  const Operator rho = Operator::pure(plus());
  EXPECT_LT(pure_factorization_residual(kd_doubly_extended(rho, pauli_z(), pauli_x()), rho), 1e-12);
}

TEST(PureFactorization, MixedStateRejected) {
  const Operator rho(CMatrix(0.5 * CMatrix::Identity(2, 2)), OperatorKind::density);
  EXPECT_EQ(kind_of([&] { pure_factorization_residual(kd_doubly_extended(rho, pauli_z(), pauli_x()), rho); }),
            ErrorKind::NotPure);
}
