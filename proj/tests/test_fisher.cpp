#include <gtest/gtest.h>

#include "psmet/fisher.hpp"

using namespace psmet;

namespace {

StateVector plus() { return StateVector(CVector(CVector::Constant(2, 1.0 / std::sqrt(2.0)))); }

CMatrix pm_basis() {
  const double r = 1 / std::sqrt(2.0);
  CMatrix b(2, 2);
  b << r, r, r, -r;
  return b;
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::NumericalFailure;
}

}  // namespace

TEST(ClassicalFisher, BinomialModel) {
  const ClassicalModel m{2, [](double t) { return std::vector<double>{t, 1 - t}; }};
  const FisherReport r = classical_fisher(m, 0.5, 1e-5);
  EXPECT_NEAR(r.value, 4.0, 1e-8);
  EXPECT_EQ(r.method, FisherMethod::finite_difference);
  ASSERT_TRUE(r.step.has_value());
  EXPECT_EQ(*r.step, 1e-5);
}

TEST(ClassicalFisher, ConstantModelIsZero) {
  const ClassicalModel m{2, [](double) { return std::vector<double>{0.3, 0.7}; }};
  EXPECT_EQ(classical_fisher(m, 0.1, 1e-5).value, 0.0);
}

TEST(ClassicalFisher, BornModelSaturatesQfiAtZero) {
  // At theta = 0 the "-" outcome has zero probability and zero slope.
  const Operator a = Operator::diagonal(std::vector<double>{0, 1});
  const ClassicalModel m = born_model(plus(), a, pm_basis());
  EXPECT_NEAR(classical_fisher(m, 0.0, 1e-5).value, qfi_pure_generator(plus(), a).value, 1e-6);
  EXPECT_NEAR(classical_fisher(m, 0.0, 1e-4).value, 1.0, 1e-6);
  EXPECT_NEAR(classical_fisher(m, 0.3, 1e-5).value, 1.0, 1e-6);
}

TEST(ClassicalFisher, Richardson) {
  const ClassicalModel m{2, [](double t) {
                           const double p = 0.5 + 0.4 * std::sin(t);
                           return std::vector<double>{p, 1 - p};
                         }};
  const double exact = 0.16 * std::cos(0.7) * std::cos(0.7) /
                       ((0.5 + 0.4 * std::sin(0.7)) * (0.5 - 0.4 * std::sin(0.7)));
  const double plain = classical_fisher(m, 0.7, 1e-2).value;
  const double rich = classical_fisher(m, 0.7, 1e-2, true).value;
  EXPECT_LT(std::abs(rich - exact), std::abs(plain - exact));
  EXPECT_NEAR(rich, exact, 1e-8);
}

TEST(ClassicalFisher, SingularOutcome) {
  const ClassicalModel m{2, [](double t) {
                           const double p = std::max(0.0, t);
                           return std::vector<double>{p, 1 - p};
                         }};
  EXPECT_EQ(kind_of([&] { classical_fisher(m, 0.0, 1e-5); }), ErrorKind::SingularOutcome);
}

TEST(ClassicalFisher, InvalidModels) {
  const ClassicalModel bad_sum{2, [](double) { return std::vector<double>{0.5, 0.6}; }};
  EXPECT_EQ(kind_of([&] { classical_fisher(bad_sum, 0.0, 1e-5); }), ErrorKind::NotAProbability);
  const ClassicalModel negative{2, [](double) { return std::vector<double>{-0.1, 1.1}; }};
  EXPECT_EQ(kind_of([&] { classical_fisher(negative, 0.0, 1e-5); }), ErrorKind::NotAProbability);
  const ClassicalModel wrong_count{3, [](double) { return std::vector<double>{0.5, 0.5}; }};
  EXPECT_EQ(kind_of([&] { classical_fisher(wrong_count, 0.0, 1e-5); }), ErrorKind::NotAProbability);
  const ClassicalModel ok{2, [](double) { return std::vector<double>{0.5, 0.5}; }};
  EXPECT_EQ(kind_of([&] { classical_fisher(ok, 0.0, 0.0); }), ErrorKind::InvalidArgument);
}

TEST(PureQfi, Examples) {
  const Operator a = Operator::diagonal(std::vector<double>{0, 1});
  EXPECT_NEAR(qfi_pure_generator(plus(), a).value, 1.0, 1e-15);
  EXPECT_EQ(qfi_pure_generator(StateVector::basis(2, 1), a).value, 0.0);

  const Operator a3 = Operator::diagonal(std::vector<double>{-1, 1, 3});
  CVector v = CVector::Zero(3);
  v[0] = v[2] = 1 / std::sqrt(2.0);
  EXPECT_NEAR(qfi_pure_generator(StateVector(v), a3).value, 16.0, 1e-12);
  EXPECT_EQ(qfi_pure_generator(plus(), a).method, FisherMethod::pure_state);
}

TEST(PureQfi, RejectsUnnormalized) {
  const Operator a = Operator::diagonal(std::vector<double>{0, 1});
  EXPECT_EQ(kind_of([&] { qfi_pure_generator(StateVector::unnormalized(CVector::Ones(2)), a); }),
            ErrorKind::NotNormalized);
}

TEST(PureQfi, TangentExamples) {
  EXPECT_EQ(qfi_pure_tangent(plus(), StateVector::unnormalized(CVector::Zero(2))).value, 0.0);
  EXPECT_EQ(kind_of([&] { qfi_pure_tangent(plus(), StateVector::unnormalized(CVector::Zero(3))); }),
            ErrorKind::DimensionMismatch);

  const Operator a = Operator::diagonal(std::vector<double>{0, 1});
  const double h = 1e-5;
  const CVector fd = (evolve(plus(), a, h).amplitudes() - evolve(plus(), a, -h).amplitudes()) / (2 * h);
  EXPECT_NEAR(qfi_pure_tangent(plus(), StateVector::unnormalized(fd)).value, 1.0, 1e-6);
}

TEST(PureQfi, AnalyticTangentMatchesGenerator) {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const Index d = 2 + t % 5;
    const Operator a = random_hermitian(d, rng);
    const StateVector psi0 = haar_state(d, rng);
    const StateVector psi = evolve(psi0, a, 0.4 * t);
    const CVector tangent = Complex(0, -1) * (a.matrix() * psi.amplitudes());
    EXPECT_NEAR(qfi_pure_tangent(psi, StateVector::unnormalized(tangent)).value,
                qfi_pure_generator(psi0, a).value, 1e-12 * std::max(1.0, qfi_pure_generator(psi0, a).value));
  }
}

TEST(PureQfi, ShiftInvariantAndBoundedByMax) {
  Rng rng(22);
  for (int t = 0; t < 100; ++t) {
    const Index d = 2 + t % 6;
    const Operator a = random_hermitian(d, rng);
    const StateVector psi0 = haar_state(d, rng);
    const double delta = 0.5 * (t - 50);
    const Operator shifted(CMatrix(a.matrix() + delta * CMatrix::Identity(d, d)), OperatorKind::hermitian);
    const double q = qfi_pure_generator(psi0, a).value;
    EXPECT_NEAR(qfi_pure_generator(psi0, shifted).value, q, 1e-9 * std::max(1.0, delta * delta));
    EXPECT_LE(q, max_qfi(a).value + 1e-9);
  }
}

TEST(SldQfi, PureFamilyMatchesTangentFormula) {
  const Operator a = Operator::diagonal(std::vector<double>{0, 1});
  const Operator rho = Operator::pure(plus());
  const FisherReport r = qfi_mixed_sld(rho, generator_derivative(rho, a));
  EXPECT_NEAR(r.value, 1.0, 1e-8);
  EXPECT_EQ(r.method, FisherMethod::sld);
  ASSERT_TRUE(r.sld_operator.has_value());
  // d rho = (L rho + rho L) / 2 on the support.
  const CMatrix& l = r.sld_operator->matrix();
  const CMatrix recon = 0.5 * (l * rho.matrix() + rho.matrix() * l);
  EXPECT_LT(detail::max_abs(recon - generator_derivative(rho, a).matrix()), 1e-10);
}

TEST(SldQfi, RandomRankOneFamilies) {
  Rng rng(23);
  for (int t = 0; t < 50; ++t) {
    const Index d = 2 + t % 5;
    const Operator a = random_hermitian(d, rng);
    const StateVector psi = haar_state(d, rng);
    const Operator rho = Operator::pure(psi);
    const double expected = qfi_pure_generator(psi, a).value;
    EXPECT_NEAR(qfi_mixed_sld(rho, generator_derivative(rho, a)).value, expected,
                1e-8 * std::max(1.0, expected));
  }
}

TEST(SldQfi, TrivialCases) {
  const Operator mixed(CMatrix(0.5 * CMatrix::Identity(2, 2)), OperatorKind::density);
  EXPECT_EQ(qfi_mixed_sld(mixed, Operator(CMatrix::Zero(2, 2), OperatorKind::hermitian)).value, 0.0);
  Rng rng(24);
  const Operator a = random_hermitian(2, rng);
  EXPECT_NEAR(qfi_mixed_sld(mixed, generator_derivative(evolve(mixed, a, 0.8), a)).value, 0.0, 1e-14);
}

TEST(SldQfi, MixedStateBelowPureQfi) {
  Rng rng(25);
  for (int t = 0; t < 30; ++t) {
    const Operator a = random_hermitian(3, rng);
    const StateVector psi = haar_state(3, rng);
    const double w = 0.1 + 0.02 * t;
    const Operator rho(CMatrix((1 - w) * Operator::pure(psi).matrix() + w / 3 * CMatrix::Identity(3, 3)),
                       OperatorKind::density);
    const double mixed = qfi_mixed_sld(rho, generator_derivative(rho, a)).value;
    EXPECT_LE(mixed, qfi_pure_generator(psi, a).value + 1e-9);
    EXPECT_LE(mixed, 4 * variance(rho, a) + 1e-9);
  }
}

TEST(SldQfi, Errors) {
  const Operator rho = Operator::pure(plus());
  CMatrix not_traceless = CMatrix::Identity(2, 2);
  EXPECT_EQ(kind_of([&] { qfi_mixed_sld(rho, Operator(not_traceless, OperatorKind::hermitian)); }),
            ErrorKind::NotTraceless);
  CMatrix not_herm(2, 2);
  not_herm << 0, 1, 0, 0;
  EXPECT_EQ(kind_of([&] { qfi_mixed_sld(rho, Operator(not_herm)); }), ErrorKind::NotHermitian);
}

TEST(MaxQfi, Examples) {
  EXPECT_NEAR(max_qfi(Operator::diagonal(std::vector<double>{-1, 1, 3})).value, 16.0, 1e-12);
  EXPECT_NEAR(max_qfi(Operator::diagonal(std::vector<double>{1, -1})).value, 4.0, 1e-12);
  EXPECT_EQ(kind_of([] { max_qfi(Operator::identity(3)); }), ErrorKind::DegenerateGenerator);
}

TEST(MaxQfi, OptimalStateAttainsValue) {
  Rng rng(26);
  for (int t = 0; t < 50; ++t) {
    const Operator a = random_hermitian(2 + t % 6, rng);
    const MaxQfi m = max_qfi(a);
    EXPECT_NEAR(qfi_pure_generator(m.optimal_state, a).value, m.value, 1e-10 * std::max(1.0, m.value));
  }
}

TEST(CramerRao, Examples) {
  EXPECT_DOUBLE_EQ(cramer_rao_bound(1.0, 1), 1.0);
  EXPECT_DOUBLE_EQ(cramer_rao_bound(16.0, 100), 6.25e-4);
  EXPECT_DOUBLE_EQ(cramer_rao_bound(4.0, 1), 0.25);
  EXPECT_GE(std::sqrt(cramer_rao_bound(4.0, 1)) * 2.0, 1.0 - 1e-15);
  EXPECT_EQ(kind_of([] { cramer_rao_bound(0.0, 1); }), ErrorKind::NonpositiveInformation);
  EXPECT_EQ(kind_of([] { cramer_rao_bound(-1.0, 1); }), ErrorKind::NonpositiveInformation);
}

TEST(FisherReport, ClampsRoundingNegatives) {
  EXPECT_EQ(detail::make_report(-1e-12, FisherMethod::sld).value, 0.0);
  EXPECT_EQ(kind_of([] { detail::make_report(-1e-6, FisherMethod::sld); }), ErrorKind::NumericalFailure);
}

TEST(ClassicalVsQuantum, RandomMeasurementsNeverExceedQfi) {
  Rng rng(27);
  for (int t = 0; t < 40; ++t) {
    const Index d = 2 + t % 4;
    const Operator a = random_hermitian(d, rng);
    const StateVector psi = haar_state(d, rng);
    const CMatrix basis = haar_unitary(d, rng);
    const double theta = 0.1 * t;
    const double qfi = qfi_pure_generator(psi, a).value;
    EXPECT_LE(classical_fisher(born_model(psi, a, basis), theta, default_step(theta)).value, qfi + 1e-6);
  }
}
