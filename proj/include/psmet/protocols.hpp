#pragma once

// Explicit constructions with divergent postselected Fisher information.
//
// supp3: generator with M >= 3 eigenvalues, F = |f1><f1| + |f2><f2| with
//   |f1> = (|a_max> + |a_min>)/sqrt2,
//   |f2> = (i(|a_max> - |a_min>)/sqrt2 + |a_k>)/sqrt2.
// supp4: extremes at least doubly degenerate, F built from
//   |f1> = (|a_max2> - |a_min1>)/sqrt2, |f2> = (|a_min2> - |a_max1>)/sqrt2,
//   and no information is lost in the discarded events as phi -> 0.

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "psmet/fisher.hpp"
#include "psmet/postselect.hpp"
#include "psmet/qcore.hpp"

namespace psmet {

enum class Protocol { supp3, supp4 };

constexpr std::string_view to_string(Protocol p) noexcept {
  return p == Protocol::supp3 ? "supp3" : "supp4";
}

struct ProtocolConfig {
  std::vector<double> eigenvalues;  // ascending
  Index k_index = 1;                // supp3 only
  double theta0 = 0.0;
  double phi = 0.0;
  double delta_theta = 0.0;
  double var_theta0 = 1e-6;  // pre-experiment variance; display scaling only
};

struct ProtocolInstance {
  Operator A;
  Postselection ps;
  StateVector psi0;
};

struct AnalyticValues {
  double qfi_ps;
  double p_ps;
};

namespace detail {

inline void validate_common(const ProtocolConfig& cfg, std::size_t min_size) {
  const auto& e = cfg.eigenvalues;
  if (e.size() < min_size)
    fail(ErrorKind::InvalidConfig, "need at least " + std::to_string(min_size) + " eigenvalues");
  if (e.size() > static_cast<std::size_t>(kMaxDim)) fail(ErrorKind::InvalidConfig, "too many eigenvalues");
  for (double x : e)
    if (!std::isfinite(x)) fail(ErrorKind::InvalidConfig, "non-finite eigenvalue");
  for (std::size_t i = 1; i < e.size(); ++i)
    if (e[i] < e[i - 1]) fail(ErrorKind::InvalidConfig, "eigenvalues must be ascending");
  if (!(e.back() > e.front())) fail(ErrorKind::InvalidConfig, "eigenvalues are all identical");
  if (!std::isfinite(cfg.theta0) || !std::isfinite(cfg.phi) || !std::isfinite(cfg.delta_theta))
    fail(ErrorKind::InvalidConfig, "non-finite angle");
  if (!(cfg.var_theta0 > 0.0) || !std::isfinite(cfg.var_theta0))
    fail(ErrorKind::InvalidConfig, "var_theta0 must be positive");
}

inline void validate_supp3(const ProtocolConfig& cfg) {
  validate_common(cfg, 3);
  const auto m = static_cast<Index>(cfg.eigenvalues.size());
  if (cfg.k_index <= 0 || cfg.k_index >= m - 1)
    fail(ErrorKind::InvalidConfig, "k must lie strictly between the extreme eigenvalue indices");
}

inline void validate_supp4(const ProtocolConfig& cfg) {
  validate_common(cfg, 4);
  const auto& e = cfg.eigenvalues;
  const double scale = 1e-12 * std::max(1.0, std::max(std::abs(e.front()), std::abs(e.back())));
  if (std::abs(e[0] - e[1]) > scale || std::abs(e[e.size() - 2] - e.back()) > scale)
    fail(ErrorKind::InvalidConfig, "minimum and maximum eigenvalues must be at least doubly degenerate");
}

// 1 - cos x without cancellation.
inline double one_minus_cos(double x) {
  const double s = std::sin(0.5 * x);
  return 2.0 * s * s;
}

}  // namespace detail

inline ProtocolInstance supp3_construct(const ProtocolConfig& cfg) {
  detail::validate_supp3(cfg);
  const Index m = static_cast<Index>(cfg.eigenvalues.size());
  const Index i_min = 0, i_max = m - 1, i_k = cfg.k_index;
  const double r2 = std::sqrt(2.0);
  const Complex i(0.0, 1.0);

  CMatrix basis = CMatrix::Zero(m, 2);
  basis(i_max, 0) = 1.0 / r2;
  basis(i_min, 0) = 1.0 / r2;
  basis(i_max, 1) = i / 2.0;
  basis(i_min, 1) = -i / 2.0;
  basis(i_k, 1) = 1.0 / r2;

  const double c = std::cos(cfg.phi), s = std::sin(cfg.phi);
  CVector v = CVector::Zero(m);
  v[i_min] = (c - s) * i / 2.0;
  v[i_max] = -(c - s) * i / 2.0;
  v[i_k] = (c + s) / r2;

  Operator a = Operator::diagonal(cfg.eigenvalues);
  StateVector psi0 = evolve(StateVector(std::move(v)), a, -cfg.theta0);
  return ProtocolInstance{std::move(a), Postselection::from_basis(basis), std::move(psi0)};
}

/// Closed-form postselected QFI and success probability, in a rearrangement
/// free of 1 - cos cancellations (identical algebraically to the expanded form).
inline AnalyticValues supp3_analytic(const ProtocolConfig& cfg) {
  detail::validate_supp3(cfg);
  const double a1 = cfg.eigenvalues.front();
  const double ak = cfg.eigenvalues[static_cast<std::size_t>(cfg.k_index)];
  const double am = cfg.eigenvalues.back();
  const double dt = cfg.delta_theta;
  const double phi = cfg.phi;
  const double range = am - a1;

  const double h_mk = detail::one_minus_cos((am - ak) * dt);
  const double h_k1 = detail::one_minus_cos((ak - a1) * dt);
  const double h_m1 = detail::one_minus_cos(range * dt);
  const double sp = std::sin(phi);
  const double c2 = std::cos(2 * phi), s2 = std::sin(2 * phi);
  const double c4 = std::cos(4 * phi), s4 = std::sin(4 * phi);

  const double denom = 8 * sp * sp + 2 * c2 * (h_mk + h_k1) + h_m1 * (1 - s2);
  if (denom < 1e-14)
    fail(ErrorKind::DivergentInformation, "postselection probability vanishes (denominator " +
                                              std::to_string(denom) + ")");
  const double mix = (ak - a1) * h_mk + (am - ak) * h_k1;
  const double numer = 4 * range * range * sp * sp * (1 - s2) - (am - ak) * (ak - a1) * (c4 + 1) * h_m1 +
                       (2 * c2 - s4) * range * mix;
  return AnalyticValues{8 * numer / (denom * denom), denom / 8};
}

inline ProtocolInstance supp4_construct(const ProtocolConfig& cfg) {
  detail::validate_supp4(cfg);
  const double lo = cfg.eigenvalues.front(), hi = cfg.eigenvalues.back();
  // Minimal embedding: (a_min1, a_min2, a_max2, a_max1).
  constexpr Index min1 = 0, min2 = 1, max2 = 2, max1 = 3;
  const double r2 = std::sqrt(2.0);

  CMatrix basis = CMatrix::Zero(4, 2);
  basis(max2, 0) = 1.0 / r2;
  basis(min1, 0) = -1.0 / r2;
  basis(min2, 1) = 1.0 / r2;
  basis(max1, 1) = -1.0 / r2;

  const double c = std::cos(cfg.phi), s = std::sin(cfg.phi);
  CVector v = CVector::Zero(4);
  v[max2] = 0.5 * (c - s);
  v[min2] = 0.5 * (c - s);
  v[max1] = 0.5 * (s + c);
  v[min1] = 0.5 * (s + c);

  Operator a = Operator::diagonal(std::vector<double>{lo, lo, hi, hi});
  StateVector psi0 = evolve(StateVector(std::move(v)), a, -cfg.theta0);
  return ProtocolInstance{std::move(a), Postselection::from_basis(basis), std::move(psi0)};
}

/// I = sin^2(2 phi) (Delta a)^2 / (1 - cos 2phi cos(Delta a dtheta))^2,
/// p = (1 - cos 2phi cos(Delta a dtheta)) / 2.
inline AnalyticValues supp4_analytic(const ProtocolConfig& cfg) {
  detail::validate_supp4(cfg);
  const double range = cfg.eigenvalues.back() - cfg.eigenvalues.front();
  const double sp = std::sin(cfg.phi);
  const double denom = 2 * sp * sp + std::cos(2 * cfg.phi) * detail::one_minus_cos(range * cfg.delta_theta);
  if (denom < 1e-14)
    fail(ErrorKind::DivergentInformation, "postselection probability vanishes (denominator " +
                                              std::to_string(denom) + ")");
  const double s2 = std::sin(2 * cfg.phi);
  return AnalyticValues{s2 * s2 * range * range / (denom * denom), denom / 2};
}

inline ProtocolInstance construct(Protocol p, const ProtocolConfig& cfg) {
  return p == Protocol::supp3 ? supp3_construct(cfg) : supp4_construct(cfg);
}

inline AnalyticValues analytic(Protocol p, const ProtocolConfig& cfg) {
  return p == Protocol::supp3 ? supp3_analytic(cfg) : supp4_analytic(cfg);
}

struct SweepRow {
  double phi = 0.0;
  double delta_theta = 0.0;
  std::optional<double> p_ps;
  std::optional<double> qfi_ps;
  std::optional<double> qfi_ps_numeric;
  std::optional<double> qfi_times_pps;
  std::optional<double> qfi_times_var;
  std::string status = "ok";  // "ok", "divergent", or an error message
};

/// Analytic and trace-form values on the (phi, dtheta) grid, phi outer.
/// Per-cell failures are recorded in the row.
inline std::vector<SweepRow> sweep(Protocol protocol, const ProtocolConfig& base,
                                   const std::vector<double>& phi_grid,
                                   const std::vector<double>& dtheta_grid) {
  if (phi_grid.empty() || dtheta_grid.empty()) fail(ErrorKind::InvalidArgument, "empty sweep grid");
  protocol == Protocol::supp3 ? detail::validate_supp3(base) : detail::validate_supp4(base);

  std::vector<SweepRow> rows;
  rows.reserve(phi_grid.size() * dtheta_grid.size());
  for (double phi : phi_grid) {
    ProtocolConfig cfg = base;
    cfg.phi = phi;
    std::optional<ProtocolInstance> inst;
    std::string construct_error;
    try {
      inst = construct(protocol, cfg);
    } catch (const Error& e) {
      construct_error = e.what();
    }
    for (double dt : dtheta_grid) {
      cfg.delta_theta = dt;
      SweepRow row;
      row.phi = phi;
      row.delta_theta = dt;
      try {
        const AnalyticValues v = analytic(protocol, cfg);
        row.p_ps = v.p_ps;
        row.qfi_ps = v.qfi_ps;
        row.qfi_times_pps = v.qfi_ps * v.p_ps;
        row.qfi_times_var = v.qfi_ps * cfg.var_theta0;
      } catch (const Error& e) {
        row.status = e.kind() == ErrorKind::DivergentInformation ? "divergent" : e.what();
      }
      if (inst) {
        try {
          row.qfi_ps_numeric = postselected_qfi(inst->psi0, inst->A, inst->ps, cfg.theta0 + dt).value;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::VanishingPostselection && row.status == "ok") row.status = e.what();
        }
      } else if (row.status == "ok") {
        row.status = construct_error;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

struct LimitSample {
  double parameter;  // dtheta in the first stage, phi in the second
  double p_ps;
  double qfi_ps;
  double product;
};

struct LimitsReport {
  Protocol protocol = Protocol::supp3;
  double phi = 0.0;
  double delta_a = 0.0;
  std::vector<LimitSample> dtheta_stage;  // dtheta -> 0 at fixed phi
  LimitSample dtheta_limit{};             // closed-form dtheta = 0 values at phi
  std::vector<LimitSample> phi_stage;     // then phi -> 0 at dtheta = 0
  double product_limit = 0.0;             // (Delta a)^2 / 2 or (Delta a)^2
  double product_tolerance = 0.0;         // relative
  bool dtheta_converges = false;
  bool p_vanishes = false;
  bool qfi_diverges = false;
  bool product_converges = false;

  bool passed() const { return dtheta_converges && p_vanishes && qfi_diverges && product_converges; }
};

namespace detail {

inline std::string describe(const std::vector<LimitSample>& seq) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& s : seq)
    os << "\n  at " << s.parameter << ": p_ps=" << s.p_ps << " qfi_ps=" << s.qfi_ps
       << " product=" << s.product;
  return os.str();
}

inline bool close_rel(double x, double expected, double rel) {
  return std::abs(x - expected) <= rel * std::max(1.0, std::abs(expected));
}

}  // namespace detail

/// dtheta -> 0 (1e-2 ... 1e-8) at cfg.phi, then phi -> 0 (1e-1 ... 1e-6) at
/// dtheta = 0. Throws LimitMismatch with the offending sequence when a limit
/// is not reproduced.
inline LimitsReport ordered_limits(Protocol protocol, const ProtocolConfig& cfg) {
  protocol == Protocol::supp3 ? detail::validate_supp3(cfg) : detail::validate_supp4(cfg);
  if (!(cfg.phi > 0.0 && cfg.phi < 0.5 * std::numbers::pi))
    fail(ErrorKind::InvalidConfig, "ordered limits need 0 < phi < pi/2");
  LimitsReport rep;
  rep.protocol = protocol;
  rep.phi = cfg.phi;
  rep.delta_a = cfg.eigenvalues.back() - cfg.eigenvalues.front();
  const double da2 = rep.delta_a * rep.delta_a;

  const auto sample = [&](double phi, double dt, double parameter) {
    ProtocolConfig c = cfg;
    c.phi = phi;
    c.delta_theta = dt;
    const AnalyticValues v = analytic(protocol, c);
    return LimitSample{parameter, v.p_ps, v.qfi_ps, v.p_ps * v.qfi_ps};
  };

  for (int e = 2; e <= 8; ++e) {
    const double dt = std::pow(10.0, -e);
    rep.dtheta_stage.push_back(sample(cfg.phi, dt, dt));
  }
  const double sp = std::sin(cfg.phi);
  const double cp = std::cos(cfg.phi);
  if (protocol == Protocol::supp3) {
    const double cot_m1 = cp / sp - 1.0;
    rep.dtheta_limit = {0.0, sp * sp, 0.5 * cot_m1 * cot_m1 * da2,
                        0.5 * (1.0 - std::sin(2 * cfg.phi)) * da2};
    rep.product_limit = 0.5 * da2;
    rep.product_tolerance = 1e-3;
  } else {
    rep.dtheta_limit = {0.0, sp * sp, (cp * cp) / (sp * sp) * da2, cp * cp * da2};
    rep.product_limit = da2;
    rep.product_tolerance = 1e-6;
  }
  const LimitSample& last = rep.dtheta_stage.back();
  rep.dtheta_converges = detail::close_rel(last.p_ps, rep.dtheta_limit.p_ps, 1e-6) &&
                         detail::close_rel(last.qfi_ps, rep.dtheta_limit.qfi_ps, 1e-6) &&
                         detail::close_rel(last.product, rep.dtheta_limit.product, 1e-6);
  if (!rep.dtheta_converges)
    fail(ErrorKind::LimitMismatch,
         "dtheta -> 0 does not reach the closed-form limit" + detail::describe(rep.dtheta_stage));

  for (int e = 1; e <= 6; ++e) {
    const double phi = std::pow(10.0, -e);
    rep.phi_stage.push_back(sample(phi, 0.0, phi));
  }
  rep.p_vanishes = rep.qfi_diverges = true;
  for (std::size_t i = 1; i < rep.phi_stage.size(); ++i) {
    rep.p_vanishes = rep.p_vanishes && rep.phi_stage[i].p_ps < rep.phi_stage[i - 1].p_ps;
    rep.qfi_diverges = rep.qfi_diverges && rep.phi_stage[i].qfi_ps > rep.phi_stage[i - 1].qfi_ps;
  }
  rep.p_vanishes = rep.p_vanishes && rep.phi_stage.back().p_ps < 1e-10;
  rep.qfi_diverges = rep.qfi_diverges && rep.phi_stage.back().qfi_ps > 1e6;
  const double final_product = rep.phi_stage.back().product;
  rep.product_converges =
      std::abs(final_product - rep.product_limit) <= rep.product_tolerance * std::abs(rep.product_limit);
  if (!rep.passed())
    fail(ErrorKind::LimitMismatch, "phi -> 0 stage does not match the expected limits (p -> 0, "
                                   "qfi -> infinity, product -> " +
                                       std::to_string(rep.product_limit) + ")" +
                                       detail::describe(rep.phi_stage));
  return rep;
}

}  // namespace psmet
