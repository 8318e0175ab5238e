// psmet: command-line front end.
//
// Exit codes: 0 success, 1 bound/limit violation, 2 usage or parse error,
// 3 numerical domain error.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psmet/io.hpp"
#include "psmet/psmet.hpp"

namespace {

using psmet::ErrorKind;
using json = nlohmann::ordered_json;

enum Exit { kOk = 0, kViolation = 1, kUsage = 2, kNumerical = 3 };

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidCost:
    case ErrorKind::InvalidProbability:
    case ErrorKind::InvalidDim:
      return kUsage;
    case ErrorKind::LimitMismatch:
      return kViolation;
    default:
      return kNumerical;
  }
}

struct Output {
  std::string path;

  void emit(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
      std::cout.flush();
      return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) psmet::fail(ErrorKind::IoError, "cannot write " + path);
    out << text;
    if (!out) psmet::fail(ErrorKind::IoError, "write failed for " + path);
  }
  void emit(const json& j) const { emit(psmet::io::dump(j) + "\n"); }
};

psmet::Protocol parse_protocol(const std::string& name) {
  if (name == "supp3") return psmet::Protocol::supp3;
  if (name == "supp4") return psmet::Protocol::supp4;
  psmet::fail(ErrorKind::InvalidArgument, "unknown protocol '" + name + "' (expected supp3 or supp4)");
}

struct QfiArgs {
  std::string generator, state, density;
  double theta = 0.0;
};

int run_qfi(const QfiArgs& args, const Output& out) {
  const auto a = psmet::io::read_operator(args.generator, psmet::OperatorKind::hermitian);
  const psmet::MaxQfi best = psmet::max_qfi(a);
  psmet::FisherReport report;
  if (!args.state.empty()) {
    report = psmet::qfi_pure_generator(psmet::io::read_state(args.state), a);
  } else {
    const auto rho0 = psmet::io::read_operator(args.density, psmet::OperatorKind::density);
    const auto rho = psmet::evolve(rho0, a, args.theta);
    report = psmet::qfi_mixed_sld(rho, psmet::generator_derivative(rho, a));
  }
  out.emit(json{{"qfi", report.value},
                {"max_qfi", best.value},
                {"delta_a", std::sqrt(best.value)},
                {"method", std::string(psmet::to_string(report.method))}});
  return kOk;
}

struct PsqfiArgs {
  std::string generator, state, projector;
  double theta = 0.0;
};

int run_psqfi(const PsqfiArgs& args, const Output& out) {
  const auto a = psmet::io::read_operator(args.generator, psmet::OperatorKind::hermitian);
  const auto psi0 = psmet::io::read_state(args.state);
  const auto ps = psmet::Postselection::from_projector(
      psmet::io::read_operator(args.projector, psmet::OperatorKind::projector));
  const psmet::TrialResult t = psmet::evaluate_trial(psi0, a, ps, args.theta);
  const double fd = psmet::postselected_qfi_fd(psi0, a, ps, args.theta, psmet::default_step(args.theta)).value;
  const auto rho = psmet::evolve(psmet::Operator::pure(psi0), a, args.theta);
  const auto kd = psmet::kd_for_postselection(rho, a, ps);
  const double from_kd = psmet::qfi_from_kd(kd, psmet::postselected_indices(kd)).value;
  out.emit(json{{"qfi_ps", t.qfi_ps},
                {"qfi_ps_finite_difference", fd},
                {"qfi_ps_from_kd", from_kd},
                {"p_ps", t.p_ps},
                {"delta_a2", t.delta_a2},
                {"anomalous", t.anomalous()},
                {"kd_min_real", t.negativity.min_real},
                {"kd_max_imag_abs", t.negativity.max_imag_abs},
                {"method", std::string(psmet::to_string(psmet::FisherMethod::closed_form))}});
  return kOk;
}

struct KdqArgs {
  std::string generator, state, density, projector, observable, format = "csv";
  double theta = 0.0;
  bool perturb = false;
  std::uint64_t seed = 0x5eed;
};

int run_kdq(const KdqArgs& args, const Output& out) {
  const auto a = psmet::io::read_operator(args.generator, psmet::OperatorKind::hermitian);
  const psmet::Operator rho0 = args.state.empty()
                                   ? psmet::io::read_operator(args.density, psmet::OperatorKind::density)
                                   : psmet::Operator::pure(psmet::io::read_state(args.state));
  const auto rho = psmet::evolve(rho0, a, args.theta);
  psmet::KdOptions opts;
  opts.perturb_singular = args.perturb;
  opts.seed = args.seed;

  std::optional<psmet::Postselection> ps;
  psmet::KDTensor kd;
  if (!args.projector.empty()) {
    ps = psmet::Postselection::from_projector(
        psmet::io::read_operator(args.projector, psmet::OperatorKind::projector));
    kd = psmet::kd_for_postselection(rho, a, *ps, opts);
  } else {
    kd = psmet::kd_doubly_extended(rho, a, psmet::io::read_operator(args.observable, psmet::OperatorKind::hermitian),
                                   opts);
  }

  if (args.format == "csv") {
    std::ostringstream os;
    psmet::io::write_kd_csv(os, kd);
    out.emit(os.str());
    return kOk;
  }

  psmet::Complex total = 0.0;
  for (const auto& q : kd.values) total += q;
  const auto neg = psmet::negativity(kd);
  json j{{"dim", kd.dim},
         {"sum_re", total.real()},
         {"sum_im", total.imag()},
         {"min_real", neg.min_real},
         {"negativity_mass", neg.negativity_mass},
         {"max_imag_abs", neg.max_imag_abs},
         {"is_classical", neg.is_classical},
         {"perturbed", kd.perturbed}};
  if (ps) {
    const auto idx = psmet::postselected_indices(kd);
    const auto cond = psmet::negativity(kd, idx);
    j["p_ps"] = psmet::conditional_kd(kd, idx).p_ps;
    j["conditional_min_real"] = cond.min_real;
    j["conditional_is_classical"] = cond.is_classical;
    j["qfi_ps"] = psmet::qfi_from_kd(kd, idx).value;
  }
  out.emit(j);
  return kOk;
}

struct ProtocolArgs {
  std::string protocol, eigs;
  long long k = 1;
  double theta0 = 0.0;
  double var_theta0 = 1e-6;
};

psmet::ProtocolConfig make_config(const ProtocolArgs& args) {
  psmet::ProtocolConfig cfg;
  cfg.eigenvalues = psmet::io::parse_list(args.eigs);
  cfg.k_index = static_cast<psmet::Index>(args.k);
  cfg.theta0 = args.theta0;
  cfg.var_theta0 = args.var_theta0;
  return cfg;
}

int run_sweep(const ProtocolArgs& args, const std::string& phi, const std::string& dtheta, const Output& out) {
  const auto protocol = parse_protocol(args.protocol);
  const auto rows =
      psmet::sweep(protocol, make_config(args), psmet::io::parse_grid(phi), psmet::io::parse_grid(dtheta));
  std::ostringstream os;
  psmet::io::write_sweep_csv(os, rows);
  out.emit(os.str());
  return kOk;
}

json samples_to_json(const std::vector<psmet::LimitSample>& seq) {
  json arr = json::array();
  for (const auto& s : seq)
    arr.push_back(json{{"parameter", s.parameter}, {"p_ps", s.p_ps}, {"qfi_ps", s.qfi_ps}, {"product", s.product}});
  return arr;
}

int run_limits(const ProtocolArgs& args, double phi, const Output& out) {
  psmet::ProtocolConfig cfg = make_config(args);
  cfg.phi = phi;
  const auto rep = psmet::ordered_limits(parse_protocol(args.protocol), cfg);
  out.emit(json{{"protocol", std::string(psmet::to_string(rep.protocol))},
                {"phi", rep.phi},
                {"delta_a", rep.delta_a},
                {"dtheta_stage", samples_to_json(rep.dtheta_stage)},
                {"dtheta_limit",
                 {{"p_ps", rep.dtheta_limit.p_ps},
                  {"qfi_ps", rep.dtheta_limit.qfi_ps},
                  {"product", rep.dtheta_limit.product}}},
                {"phi_stage", samples_to_json(rep.phi_stage)},
                {"product_limit", rep.product_limit},
                {"passed", rep.passed()}});
  return kOk;
}

int run_theorem(int theorem, long long trials, long long dim, std::uint64_t seed, const Output& out) {
  const auto s = psmet::theorem_check(theorem, trials, static_cast<psmet::Index>(dim), seed);
  json j{{"theorem", s.theorem},   {"dim", s.dim},           {"trials", s.trials},
         {"evaluated", s.evaluated}, {"skipped", s.skipped}, {"anomalies", s.anomalies},
         {"violations", s.violations}, {"max_ratio", s.max_ratio}};
  if (theorem == 1) {
    j["worst_min_real"] = s.worst_classical_min_real;
    j["worst_max_imag_abs"] = s.worst_classical_imag;
  } else {
    j["max_min_real_of_anomalies"] = s.anomalies > 0 ? json(s.max_min_real_of_anomalies) : json(nullptr);
  }
  out.emit(j);
  if (s.violations > 0) {
    std::cerr << "theorem " << theorem << ": " << s.violations << " violation(s)\n";
    return kViolation;
  }
  return kOk;
}

struct CostArgs {
  double fisher = 0.0;
  std::optional<double> fisher_ps;
  double p_ps = 1.0;
  psmet::CostModel costs;
};

int run_costrate(const CostArgs& args, const Output& out) {
  const double fisher_ps = args.fisher_ps.value_or(args.fisher);
  out.emit(json{{"rate", psmet::rate(args.fisher, args.costs)},
                {"ps_rate", psmet::ps_rate(fisher_ps, args.p_ps, args.costs)},
                {"breakeven", psmet::breakeven(args.p_ps, args.costs)}});
  return kOk;
}

bool looks_negative_number(const std::string& s) {
  return s.size() >= 2 && s[0] == '-' && (std::isdigit(static_cast<unsigned char>(s[1])) || s[1] == '.');
}

// "--flag -0.5" -> "--flag=-0.5" so negative values are not taken for options.
std::vector<std::string> join_negative_values(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0 && a.find('=') == std::string::npos && i + 1 < args.size() &&
        looks_negative_number(args[i + 1])) {
      out.push_back(a + "=" + args[i + 1]);
      ++i;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Postselected quantum metrology toolkit", "psmet"};
  app.require_subcommand(1);
  Output out;

  QfiArgs qfi;
  auto* c_qfi = app.add_subcommand("qfi", "Quantum Fisher information of exp(-iA theta) applied to a state");
  c_qfi->add_option("--generator", qfi.generator, "Generator JSON")->required()->check(CLI::ExistingFile);
  auto* qfi_state = c_qfi->add_option("--state", qfi.state, "Pure state JSON")->check(CLI::ExistingFile);
  auto* qfi_density = c_qfi->add_option("--density", qfi.density, "Density operator JSON")->check(CLI::ExistingFile);
  qfi_state->excludes(qfi_density);
  c_qfi->add_option("--theta", qfi.theta, "Parameter value (density input)");
  c_qfi->add_option("--out", out.path, "Write output to this file");

  PsqfiArgs psqfi;
  auto* c_psqfi = app.add_subcommand("psqfi", "Postselected quantum Fisher information");
  c_psqfi->add_option("--generator", psqfi.generator)->required()->check(CLI::ExistingFile);
  c_psqfi->add_option("--state", psqfi.state)->required()->check(CLI::ExistingFile);
  c_psqfi->add_option("--projector", psqfi.projector, "Postselection projector JSON")
      ->required()
      ->check(CLI::ExistingFile);
  c_psqfi->add_option("--theta", psqfi.theta);
  c_psqfi->add_option("--out", out.path);

  KdqArgs kdq;
  auto* c_kdq = app.add_subcommand("kdq", "Doubly extended Kirkwood-Dirac quasiprobabilities");
  c_kdq->add_option("--generator", kdq.generator)->required()->check(CLI::ExistingFile);
  auto* kdq_state = c_kdq->add_option("--state", kdq.state)->check(CLI::ExistingFile);
  auto* kdq_density = c_kdq->add_option("--density", kdq.density)->check(CLI::ExistingFile);
  kdq_state->excludes(kdq_density);
  auto* kdq_proj = c_kdq->add_option("--projector", kdq.projector)->check(CLI::ExistingFile);
  auto* kdq_obs = c_kdq->add_option("--observable", kdq.observable)->check(CLI::ExistingFile);
  kdq_proj->excludes(kdq_obs);
  c_kdq->add_option("--theta", kdq.theta);
  c_kdq->add_option("--format", kdq.format)->check(CLI::IsMember({"csv", "json"}));
  c_kdq->add_flag("--perturb", kdq.perturb, "Rotate the f basis slightly when some <f|a> vanishes");
  c_kdq->add_option("--seed", kdq.seed);
  c_kdq->add_option("--out", out.path);

  ProtocolArgs sweep_args;
  std::string phi_grid, dtheta_grid;
  auto* c_sweep = app.add_subcommand("sweep", "Closed-form vs trace-form sweep over (phi, dtheta)");
  c_sweep->add_option("--protocol", sweep_args.protocol)->required();
  c_sweep->add_option("--eigs", sweep_args.eigs, "Ascending eigenvalues, comma separated")->required();
  c_sweep->add_option("--k", sweep_args.k, "Index of the intermediate eigenvalue (supp3)");
  c_sweep->add_option("--phi", phi_grid, "a:b:n")->required();
  c_sweep->add_option("--dtheta", dtheta_grid, "a:b:n")->required();
  c_sweep->add_option("--theta0", sweep_args.theta0);
  c_sweep->add_option("--var-theta0", sweep_args.var_theta0);
  c_sweep->add_option("--out", out.path);

  ProtocolArgs limit_args;
  double limit_phi = 0.5;
  auto* c_limits = app.add_subcommand("limits", "Ordered dtheta -> 0 then phi -> 0 limits");
  c_limits->add_option("--protocol", limit_args.protocol)->required();
  c_limits->add_option("--eigs", limit_args.eigs)->required();
  c_limits->add_option("--k", limit_args.k);
  c_limits->add_option("--phi", limit_phi, "phi for the dtheta stage");
  c_limits->add_option("--theta0", limit_args.theta0);
  c_limits->add_option("--out", out.path);

  int theorem = 1;
  long long trials = 0, dim = 0;
  std::uint64_t seed = 0;
  auto* c_thm = app.add_subcommand("theorem-check", "Randomized checks of the commuting bound and negativity witness");
  c_thm->add_option("--theorem", theorem)->required()->check(CLI::IsMember({1, 2}));
  c_thm->add_option("--trials", trials)->required();
  c_thm->add_option("--dim", dim)->required();
  c_thm->add_option("--seed", seed)->required();
  c_thm->add_option("--out", out.path);

  CostArgs cost;
  auto* c_cost = app.add_subcommand("costrate", "Information-cost rates and the break-even condition");
  c_cost->add_option("--fisher", cost.fisher, "Fisher information without postselection")->required();
  c_cost->add_option("--fisher-ps", cost.fisher_ps, "Postselected Fisher information (default: --fisher)");
  c_cost->add_option("--p-ps", cost.p_ps, "Postselection probability");
  c_cost->add_option("--c-prepare", cost.costs.c_prepare);
  c_cost->add_option("--c-measure", cost.costs.c_measure);
  c_cost->add_option("--c-postselect", cost.costs.c_postselect);
  c_cost->add_option("--trials", cost.costs.trials);
  c_cost->add_option("--out", out.path);

  std::vector<std::string> args = join_negative_values(argc, argv);
  std::reverse(args.begin() + 1, args.end());
  args.erase(args.begin());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (c_qfi->parsed()) {
      if (qfi.state.empty() && qfi.density.empty())
        psmet::fail(ErrorKind::InvalidArgument, "qfi needs --state or --density");
      return run_qfi(qfi, out);
    }
    if (c_psqfi->parsed()) return run_psqfi(psqfi, out);
    if (c_kdq->parsed()) {
      if (kdq.state.empty() && kdq.density.empty())
        psmet::fail(ErrorKind::InvalidArgument, "kdq needs --state or --density");
      if (kdq.projector.empty() && kdq.observable.empty())
        psmet::fail(ErrorKind::InvalidArgument, "kdq needs --projector or --observable");
      return run_kdq(kdq, out);
    }
    if (c_sweep->parsed()) return run_sweep(sweep_args, phi_grid, dtheta_grid, out);
    if (c_limits->parsed()) return run_limits(limit_args, limit_phi, out);
    if (c_thm->parsed()) return run_theorem(theorem, trials, dim, seed, out);
    if (c_cost->parsed()) return run_costrate(cost, out);
  } catch (const psmet::Error& e) {
    std::cerr << "psmet: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "psmet: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
